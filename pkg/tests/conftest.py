"""Shared fixtures: sphere latitude, circle, torus, helicoid and the Heisenberg form."""

from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
import pytest

from myller_geometry.core.expr import ScalarFunction
from myller_geometry.core.fields import SampledCurve
from myller_geometry.core.myller import MyllerConfig
from myller_geometry.core.nonholonomic import DistributionField, pfaff_from_expressions
from myller_geometry.core.surface import SurfacePatch
from myller_geometry.models import Grid

SPECS_DIR = Path(__file__).resolve().parent.parent / "specs"
TWO_PI = 2.0 * np.pi


def funcs(texts: Sequence[str], variables: Sequence[str] = ("t",)) -> list[ScalarFunction]:
    return [ScalarFunction.from_expression(text, variables) for text in texts]


def patch(texts: Sequence[str], u_range: tuple[float, float], v_range: tuple[float, float]) -> SurfacePatch:
    x, y, z = funcs(texts, ("u", "v"))
    return SurfacePatch.from_expressions(x, y, z, u_range, v_range)


def pfaff_field(texts: Sequence[str], axis: tuple[float, float, float] | None = None) -> DistributionField:
    X, Y, Z = funcs(texts, ("x", "y", "z"))
    return DistributionField(pfaff=pfaff_from_expressions(X, Y, Z), axis=axis)


@pytest.fixture
def specs_dir() -> Path:
    return SPECS_DIR


@pytest.fixture
def latitude() -> Callable[..., MyllerConfig]:
    """Latitude at colatitude u0 of the unit sphere, tangent field, outward normal."""

    def build(u0: float = np.pi / 3, n: int = 513) -> MyllerConfig:
        rho, height = float(np.sin(u0)), float(np.cos(u0))
        curve = SampledCurve.reparametrize(
            funcs([f"{rho!r}*cos(t)", f"{rho!r}*sin(t)", f"{height!r}"]),
            0.0,
            TWO_PI,
            n,
        )
        xi = funcs(["-sin(t)", "cos(t)", "0"])
        nu = funcs([f"{rho!r}*cos(t)", f"{rho!r}*sin(t)", f"{height!r}"])
        return MyllerConfig.from_functions(curve, xi, nu)

    return build


@pytest.fixture
def circle() -> Callable[..., SampledCurve]:
    """Unit circle in the xy-plane, in arclength."""

    def build(n: int = 257) -> SampledCurve:
        return SampledCurve.from_expressions(
            funcs(["cos(s)", "sin(s)", "0"], ("s",)),
            Grid(start=0.0, stop=TWO_PI, n=n),
        )

    return build


@pytest.fixture
def sphere() -> SurfacePatch:
    return patch(["sin(u)*cos(v)", "sin(u)*sin(v)", "cos(u)"], (0.2, 2.9), (-0.5, 6.8))


@pytest.fixture
def torus() -> SurfacePatch:
    """Torus with radii 2 and 1/2; u is the tube angle."""
    return patch(
        ["(2 + 0.5*cos(u))*cos(v)", "(2 + 0.5*cos(u))*sin(v)", "0.5*sin(u)"],
        (0.0, TWO_PI),
        (0.0, TWO_PI),
    )


@pytest.fixture
def helicoid() -> SurfacePatch:
    return patch(["u*cos(v)", "u*sin(v)", "v"], (-2.0, 2.0), (0.0, TWO_PI))


@pytest.fixture
def cylinder() -> SurfacePatch:
    """Cylinder of radius 2; u runs along the circles."""
    return patch(["2*cos(u)", "2*sin(u)", "v"], (0.0, TWO_PI), (-1.0, 1.0))


@pytest.fixture
def heisenberg() -> DistributionField:
    return pfaff_field(["-y", "x", "1"])
