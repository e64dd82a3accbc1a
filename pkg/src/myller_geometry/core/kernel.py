"""Vector algebra, grid calculus and the frame-evolution integrator."""

from collections.abc import Callable
from typing import TYPE_CHECKING, Any

import numpy as np
import structlog

from myller_geometry.config import DEFAULT_TOLERANCES
from myller_geometry.errors import DegenerateFrame, OutOfDomain, UnwrapAmbiguity
from myller_geometry.models import Frame, FramedCurve, Grid

if TYPE_CHECKING:
    from myller_geometry.core.expr import ScalarFunction

logger = structlog.get_logger()

GRAM_MIN = 1e-12
UNWRAP_TIE = 1e-9

Coefficients = np.ndarray | Callable[[float], np.ndarray] | None


def rowdot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise dot product of (..., 3) arrays."""
    return np.einsum("...i,...i->...", a, b)


def rownorm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(rowdot(a, a))


def triple(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Scalar triple product <a, b, c> = (a x b) . c, row-wise."""
    return rowdot(np.cross(a, b), c)


def orthonormalize_rows(m: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt on the rows of a 3x3 matrix."""
    gram_det = float(np.linalg.det(m @ m.T))
    if gram_det <= GRAM_MIN:
        raise DegenerateFrame("Frame vectors are linearly dependent", gram=gram_det)

    e1 = m[0] / np.linalg.norm(m[0])
    e2 = m[1] - np.dot(m[1], e1) * e1
    e2 = e2 / np.linalg.norm(e2)
    e3 = m[2] - np.dot(m[2], e1) * e1
    e3 = e3 - np.dot(e3, e2) * e2
    e3 = e3 / np.linalg.norm(e3)

    if np.dot(np.cross(e1, e2), e3) < 0:
        raise DegenerateFrame("Frame is left-handed")
    return np.vstack([e1, e2, e3])


def orthonormalize(frame: Frame) -> Frame:
    """Orthonormalize a frame, keeping the direction of e1."""
    return Frame.from_matrix(frame.origin, orthonormalize_rows(frame.matrix))


def derivative(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Five-point derivative along axis 0: central inside, one-sided at the ends."""
    f = np.asarray(values, dtype=float)
    if f.shape[0] != grid.n:
        raise ValueError(f"{f.shape[0]} values for a grid of {grid.n} nodes")
    scale = 1.0 / (12.0 * grid.h)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) * scale
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * scale
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * scale
    out[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) * scale
    out[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) * scale
    return out


def differentiate(f: "ScalarFunction", var: str, point: dict[str, float]) -> float:
    """Derivative of f with respect to `var` at `point`.

    Expression-backed functions use forward-mode duals; sample-backed ones
    use the grid stencils and must be asked at a grid node.
    """
    if f.is_sampled:
        grid = f.grid
        value = point[var]
        index = grid.node_index(value)
        if index is None:
            raise OutOfDomain("Sample-backed function asked off its grid", point=value)
        return float(derivative(f.samples, grid)[index])
    return float(f.eval_dual(point, var)[1])


def quadrature(values: np.ndarray, grid: Grid) -> float:
    """Composite Simpson; an even node count closes with one trapezoid panel."""
    f = np.asarray(values, dtype=float)
    if f.shape[0] != grid.n:
        raise ValueError(f"{f.shape[0]} values for a grid of {grid.n} nodes")
    h = grid.h
    m = grid.n if grid.n % 2 == 1 else grid.n - 1
    simpson = h / 3.0 * (f[0] + f[m - 1] + 4.0 * np.sum(f[1 : m - 1 : 2]) + 2.0 * np.sum(f[2 : m - 2 : 2]))
    if m == grid.n:
        return float(simpson)
    return float(simpson + 0.5 * h * (f[-2] + f[-1]))


def cumulative_quadrature(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Running integral from the first node, using cubic panels."""
    f = np.asarray(values, dtype=float)
    h = grid.h
    increments = np.empty((grid.n - 1,) + f.shape[1:])
    increments[1:-1] = h / 24.0 * (-f[:-3] + 13.0 * f[1:-2] + 13.0 * f[2:-1] - f[3:])
    increments[0] = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
    increments[-1] = h / 24.0 * (f[-4] - 5.0 * f[-3] + 19.0 * f[-2] + 9.0 * f[-1])
    out = np.zeros_like(f)
    out[1:] = np.cumsum(increments, axis=0)
    return out


def _coefficient_source(
    coefficients: Coefficients,
    grid: Grid,
) -> Callable[[int, float], Any]:
    if coefficients is None:
        return lambda i, frac: None
    if callable(coefficients):
        fn = coefficients
        return lambda i, frac: fn(grid.start + (i + frac) * grid.h)
    samples = np.asarray(coefficients, dtype=float)
    return lambda i, frac: samples[i] + frac * (samples[i + 1] - samples[i])


def rk4_integrate(
    rhs: Callable[[float, np.ndarray, Any], np.ndarray],
    y0: np.ndarray,
    grid: Grid,
    coefficients: Coefficients = None,
    post_step: Callable[[np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """Classical RK4 over the grid; returns the state at every node.

    `rhs(s, y, c)` receives the coefficient values at s: exact when
    `coefficients` is a callable, linearly interpolated between nodes when
    it is an array of node samples.
    """
    coeff_at = _coefficient_source(coefficients, grid)
    h = grid.h
    y = np.array(y0, dtype=float)
    states = np.empty((grid.n,) + y.shape)
    states[0] = y

    for i in range(grid.n - 1):
        s0 = grid.start + i * h
        c_start, c_mid, c_end = coeff_at(i, 0.0), coeff_at(i, 0.5), coeff_at(i, 1.0)
        k1 = rhs(s0, y, c_start)
        k2 = rhs(s0 + 0.5 * h, y + 0.5 * h * k1, c_mid)
        k3 = rhs(s0 + 0.5 * h, y + 0.5 * h * k2, c_mid)
        k4 = rhs(s0 + h, y + h * k3, c_end)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if post_step is not None:
            y = post_step(y)
        states[i + 1] = y

    return states


def _frame_rhs(s: float, y: np.ndarray, c: np.ndarray) -> np.ndarray:
    a, b, cc, v1, v2, v3 = c
    basis = y[1:]
    generator = np.array([[0.0, a, b], [-a, 0.0, cc], [-b, -cc, 0.0]])
    out = np.empty_like(y)
    out[0] = np.array([v1, v2, v3]) @ basis
    out[1:] = generator @ basis
    return out


def _reorthonormalize(y: np.ndarray) -> np.ndarray:
    y[1:] = orthonormalize_rows(y[1:])
    return y


def evolve_frame(
    coeffs: np.ndarray | Callable[[float], np.ndarray],
    velocity: np.ndarray | Callable[[float], np.ndarray],
    init: Frame,
    grid: Grid,
    tol_ortho: float = DEFAULT_TOLERANCES.ortho,
) -> FramedCurve:
    """Integrate de_i/ds = A(s) e and dr/ds = v(s) . e from `init`.

    `coeffs` gives (a, b, c) of the skew generator [[0,a,b],[-a,0,c],[-b,-c,0]],
    `velocity` the components of dr/ds in the moving frame; both as node
    samples of shape (n, 3) or as callables of s.
    """
    init.check(tol_ortho)

    if callable(coeffs) and callable(velocity):
        coeff_fn, vel_fn = coeffs, velocity

        def combined(s: float) -> np.ndarray:
            return np.concatenate([coeff_fn(s), vel_fn(s)])

        source: Coefficients = combined
    else:
        nodes = grid.s
        coeff_samples = np.array([coeffs(s) for s in nodes]) if callable(coeffs) else np.asarray(coeffs, dtype=float)
        vel_samples = np.array([velocity(s) for s in nodes]) if callable(velocity) else np.asarray(velocity, dtype=float)
        source = np.hstack([coeff_samples, vel_samples])

    y0 = np.vstack([init.origin, init.matrix])
    states = rk4_integrate(_frame_rhs, y0, grid, source, post_step=_reorthonormalize)
    curve = FramedCurve(grid=grid, positions=states[:, 0], frames=states[:, 1:])
    logger.debug("Frame evolved", nodes=grid.n, drift=curve.max_orthonormality_defect())
    return curve


def unwrap_angle(raw: np.ndarray) -> np.ndarray:
    """Remove 2*pi jumps so that adjacent angles differ by less than pi."""
    angles = np.asarray(raw, dtype=float)
    if angles.size < 2:
        return angles.copy()
    steps = np.diff(angles)
    wrapped = np.mod(steps + np.pi, 2.0 * np.pi) - np.pi
    ties = np.nonzero(np.abs(np.abs(wrapped) - np.pi) <= UNWRAP_TIE)[0]
    if ties.size:
        raise UnwrapAmbiguity("Adjacent angles differ by pi", node=int(ties[0]) + 1)
    out = np.empty_like(angles)
    out[0] = angles[0]
    out[1:] = angles[0] + np.cumsum(wrapped)
    return out


def normalize_jet(
    v: np.ndarray,
    d1: np.ndarray,
    d2: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value and first two derivatives of v/|v| from those of v (row-wise)."""
    r = rownorm(v)[:, None]
    r1 = rowdot(v, d1)[:, None] / r
    r2 = (rowdot(d1, d1)[:, None] + rowdot(v, d2)[:, None]) / r - r1 * r1 / r
    n0 = v / r
    n1 = d1 / r - v * r1 / r**2
    n2 = d2 / r - 2.0 * d1 * r1 / r**2 - v * r2 / r**2 + 2.0 * v * r1**2 / r**3
    return n0, n1, n2
