import numpy as np
import pytest

from myller_geometry.core.kernel import (
    cumulative_quadrature,
    derivative,
    evolve_frame,
    orthonormalize_rows,
    quadrature,
    triple,
    unwrap_angle,
)
from myller_geometry.errors import DegenerateFrame, SchemaError, UnwrapAmbiguity
from myller_geometry.models import Frame, Grid

TWO_PI = 2.0 * np.pi


def circle_frame(n: int):
    grid = Grid(start=0.0, stop=TWO_PI, n=n)
    coeffs = np.tile([1.0, 0.0, 0.0], (n, 1))
    velocity = np.tile([1.0, 0.0, 0.0], (n, 1))
    return evolve_frame(coeffs, velocity, Frame.identity(), grid)


def test_circle_closes() -> None:
    curve = circle_frame(2048)
    assert curve.endpoint_gap() <= 1e-9
    assert curve.max_orthonormality_defect() <= 1e-12
    np.testing.assert_allclose(np.linalg.norm(curve.positions - [0.0, 1.0, 0.0], axis=1), 1.0, atol=1e-9)


def test_fourth_order_convergence() -> None:
    # exact solution: r(s) = (sin s, 1 - cos s, 0)
    errors = []
    for n in (33, 65, 129):
        grid = Grid(start=0.0, stop=2.0, n=n)
        curve = evolve_frame(
            lambda s: np.array([1.0, 0.0, 0.0]),
            lambda s: np.array([1.0, 0.0, 0.0]),
            Frame.identity(),
            grid,
        )
        exact = np.array([np.sin(2.0), 1.0 - np.cos(2.0), 0.0])
        errors.append(np.linalg.norm(curve.positions[-1] - exact))
    rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(rates > 3.7)


def test_helix_from_constant_coefficients() -> None:
    # curvature 1, torsion 1/2: e1' = e2, e2' = -e1 + tau e3
    grid = Grid(start=0.0, stop=10.0, n=1001)
    curve = evolve_frame(
        lambda s: np.array([1.0, 0.0, 0.5]),
        lambda s: np.array([1.0, 0.0, 0.0]),
        Frame.identity(),
        grid,
    )
    axis = np.array([0.5, 0.0, 1.0]) / np.hypot(0.5, 1.0)
    pitch = curve.positions @ axis
    np.testing.assert_allclose(np.diff(pitch), np.diff(pitch)[0], atol=1e-10)


def test_orthonormalize_rejects_degenerate_and_left_handed() -> None:
    with pytest.raises(DegenerateFrame):
        orthonormalize_rows(np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(DegenerateFrame):
        orthonormalize_rows(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]))
    rows = orthonormalize_rows(np.array([[2.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.3, 0.2, 4.0]]))
    np.testing.assert_allclose(rows, np.eye(3), atol=1e-15)


def test_frame_check_rejects_bad_initial_frame() -> None:
    grid = Grid(start=0.0, stop=1.0, n=11)
    skewed = Frame(origin=(0, 0, 0), e1=(1, 0, 0), e2=(0.1, 1, 0), e3=(0, 0, 1))
    with pytest.raises(DegenerateFrame):
        evolve_frame(np.zeros((11, 3)), np.tile([1.0, 0.0, 0.0], (11, 1)), skewed, grid)


def test_derivative_and_quadrature() -> None:
    grid = Grid(start=0.0, stop=np.pi, n=201)
    s = grid.s
    np.testing.assert_allclose(derivative(np.sin(s), grid), np.cos(s), atol=1e-7)
    assert quadrature(np.sin(s), grid) == pytest.approx(2.0, abs=1e-8)
    even = Grid(start=0.0, stop=np.pi, n=200)
    assert quadrature(np.sin(even.s), even) == pytest.approx(2.0, abs=1e-6)
    np.testing.assert_allclose(cumulative_quadrature(np.sin(s), grid), 1.0 - np.cos(s), atol=1e-8)


def test_triple_product() -> None:
    assert triple(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0])) == 1.0


def test_unwrap_angle() -> None:
    raw = np.mod(np.linspace(0.0, 4.0 * np.pi, 50), TWO_PI) - np.pi
    out = unwrap_angle(raw)
    np.testing.assert_allclose(np.diff(out), np.diff(out)[0], atol=1e-12)
    with pytest.raises(UnwrapAmbiguity):
        unwrap_angle(np.array([0.0, np.pi]))


def test_grid_needs_five_nodes() -> None:
    with pytest.raises(SchemaError):
        Grid(start=0.0, stop=1.0, n=4)
