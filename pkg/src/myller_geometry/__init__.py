"""Invariant theory of Myller configurations, surfaces and nonholonomic distributions."""

__version__ = "0.1.0"
