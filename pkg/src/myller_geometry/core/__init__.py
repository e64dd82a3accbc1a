"""Geometry modules."""
