"""Versor fields and plane fields along a curve.

Curves are sampled once onto a uniform arclength grid as jets (positions
with their first three s-derivatives); versor and plane fields become jets
of unit vectors on the same grid.  Everything downstream works on these
arrays.
"""

from collections.abc import Callable, Mapping, Sequence
from typing import Any

import numpy as np
import structlog

from myller_geometry.config import DEFAULT_TOLERANCES, Tolerances
from myller_geometry.core.expr import ScalarFunction
from myller_geometry.core.kernel import (
    cumulative_quadrature,
    derivative,
    evolve_frame,
    normalize_jet,
    quadrature,
    rowdot,
    rownorm,
)
from myller_geometry.errors import NotArclength, SchemaError, VanishingCurvature
from myller_geometry.models import (
    Frame,
    FramedCurve,
    FrenetData,
    Grid,
    PlaneFieldData,
    VectorJet,
)
from myller_geometry.models.geometry import ArrayModel

logger = structlog.get_logger()

ARCLENGTH_TOL = 1e-6
UNIT_REJECT = 1e-3
PROFILE_NORM_TOL = 1e-8


def _column(value: Any, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()


def _stack(parts: Sequence[Any], n: int) -> np.ndarray:
    return np.column_stack([_column(p, n) for p in parts])


def stencil_jet(values: np.ndarray, grid: Grid, order: int = 2) -> VectorJet:
    """Jet of node samples, derivatives by repeated five-point stencils."""
    jets = [np.asarray(values, dtype=float)]
    for _ in range(order):
        jets.append(derivative(jets[-1], grid))
    jets += [None] * (3 - order)
    return VectorJet(grid=grid, value=jets[0], d1=jets[1], d2=jets[2], d3=jets[3])


def _chain_to_arclength(
    jets: list[np.ndarray],
    speed: tuple[np.ndarray, np.ndarray, np.ndarray],
) -> list[np.ndarray]:
    v, vt, vtt = (x[:, None] for x in speed)
    t1 = 1.0 / v
    t2 = -vt / v**3
    t3 = -vtt / v**4 + 3.0 * vt**2 / v**5
    out = [jets[0], jets[1] * t1]
    if len(jets) > 2:
        out.append(jets[2] * t1**2 + jets[1] * t2)
    if len(jets) > 3:
        out.append(jets[3] * t1**3 + 3.0 * jets[2] * t1 * t2 + jets[1] * t3)
    return out


class SampledCurve(ArrayModel):
    """Curve on a uniform arclength grid.

    `t` holds the original parameter at each node (equal to s for curves
    given in arclength); `speed` holds |dr/dt| and its first two
    t-derivatives there, used to convert parameter jets to s-jets.
    """

    grid: Grid
    variable: str
    t: np.ndarray
    jet: VectorJet
    speed: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def positions(self) -> np.ndarray:
        return self.jet.value

    @property
    def tangent(self) -> np.ndarray:
        return self.jet.d1

    @property
    def is_arclength(self) -> bool:
        return self.variable == "s"

    @classmethod
    def from_expressions(
        cls,
        funcs: Sequence[ScalarFunction],
        grid: Grid,
        variable: str = "s",
    ) -> "SampledCurve":
        """Sample an arclength-parametrized curve; rejects other parameters."""
        s = grid.s
        parts = [f.eval_dual({variable: s}, variable, order=3) for f in funcs]
        jets = [_stack([p[k] for p in parts], grid.n) for k in range(4)]
        ones = np.ones(grid.n)
        curve = cls(
            grid=grid,
            variable=variable,
            t=s,
            jet=VectorJet(grid=grid, value=jets[0], d1=jets[1], d2=jets[2], d3=jets[3]),
            speed=(ones, np.zeros(grid.n), np.zeros(grid.n)),
        )
        return curve.check_arclength()

    @classmethod
    def from_samples(cls, positions: np.ndarray, grid: Grid) -> "SampledCurve":
        ones = np.ones(grid.n)
        curve = cls(
            grid=grid,
            variable="s",
            t=grid.s,
            jet=stencil_jet(positions, grid, order=3),
            speed=(ones, np.zeros(grid.n), np.zeros(grid.n)),
        )
        return curve.check_arclength()

    @classmethod
    def reparametrize(
        cls,
        funcs: Sequence[ScalarFunction],
        t0: float,
        t1: float,
        n: int,
        variable: str = "t",
    ) -> "SampledCurve":
        """Resample a curve given in parameter t onto a uniform arclength grid."""

        def speed_at(t: np.ndarray) -> np.ndarray:
            derivs = [_column(f.eval_dual({variable: t}, variable)[1], t.size) for f in funcs]
            return np.sqrt(sum(d * d for d in derivs))

        t_nodes = np.linspace(t0, t1, n)
        table = np.concatenate([[0.0], np.cumsum(_panel_lengths(speed_at, t_nodes[:-1], t_nodes[1:]))])
        total = float(table[-1])
        if total <= 0.0:
            raise SchemaError("Curve has zero length", pointer=f"/{variable}")
        grid = Grid(start=0.0, stop=total, n=n)
        targets = grid.s

        t = np.interp(targets, table, t_nodes)
        for _ in range(4):
            k = np.clip(np.searchsorted(t_nodes, t, side="right") - 1, 0, n - 2)
            arc = table[k] + _panel_lengths(speed_at, t_nodes[k], t)
            t = t - (arc - targets) / speed_at(t)
        t[0], t[-1] = t0, t1

        parts = [f.eval_dual({variable: t}, variable, order=3) for f in funcs]
        t_jets = [_stack([p[k] for p in parts], n) for k in range(4)]
        v = rownorm(t_jets[1])
        vt = rowdot(t_jets[1], t_jets[2]) / v
        vtt = (rowdot(t_jets[2], t_jets[2]) + rowdot(t_jets[1], t_jets[3])) / v - vt * vt / v
        speed = (v, vt, vtt)
        jets = _chain_to_arclength(t_jets, speed)
        logger.info("Curve reparametrized", length=total, nodes=n)
        curve = cls(
            grid=grid,
            variable=variable,
            t=t,
            jet=VectorJet(grid=grid, value=jets[0], d1=jets[1], d2=jets[2], d3=jets[3]),
            speed=speed,
        )
        return curve.check_arclength()

    def check_arclength(self, tol: float = ARCLENGTH_TOL) -> "SampledCurve":
        defect = np.abs(rownorm(self.tangent) - 1.0)
        bad = np.nonzero(defect > tol)[0]
        if bad.size:
            raise NotArclength(
                "Curve parameter is not arclength; use a 't' range to reparametrize",
                node=int(bad[0]),
                speed=float(rownorm(self.tangent)[bad[0]]),
            )
        return self

    def field_jet(
        self,
        funcs: Sequence[ScalarFunction],
        normalize: bool = True,
        pointer: str = "/xi",
    ) -> VectorJet:
        """Jet of a vector field given by functions of the curve parameter."""
        n = self.grid.n
        if all(f.is_sampled for f in funcs):
            values = np.column_stack([f.samples for f in funcs])  # type: ignore[misc]
            jet = stencil_jet(values, self.grid)
        else:
            parts = [f.eval_dual({self.variable: self.t}, self.variable, order=2) for f in funcs]
            t_jets = [_stack([p[k] for p in parts], n) for k in range(3)]
            jets = _chain_to_arclength(t_jets, self.speed)
            jet = VectorJet(grid=self.grid, value=jets[0], d1=jets[1], d2=jets[2])
        return unit_jet(jet, pointer) if normalize else jet

    def tangent_jet(self) -> VectorJet:
        """Jet of the unit tangent alpha = dr/ds."""
        return VectorJet(grid=self.grid, value=self.jet.d1, d1=self.jet.d2, d2=self.jet.d3)


def _panel_lengths(
    speed_at: Callable[[np.ndarray], np.ndarray],
    a: np.ndarray,
    b: np.ndarray,
) -> np.ndarray:
    """Gauss-Legendre arclength of [a_k, b_k] panels."""
    nodes, weights = np.polynomial.legendre.leggauss(8)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    points = mid[:, None] + half[:, None] * nodes[None, :]
    values = speed_at(points.ravel()).reshape(points.shape)
    return half * (values @ weights)


def unit_jet(jet: VectorJet, pointer: str = "/xi") -> VectorJet:
    """Renormalize a vector jet; reject inputs far from unit length."""
    norms = rownorm(jet.value)
    bad = np.nonzero(np.abs(norms - 1.0) > UNIT_REJECT)[0]
    if bad.size:
        raise SchemaError(
            "Field is not a unit vector field",
            pointer=pointer,
            node=int(bad[0]),
            norm=float(norms[bad[0]]),
        )
    if jet.d2 is None:
        return VectorJet(grid=jet.grid, value=jet.value / norms[:, None], d1=jet.d1)
    n0, n1, n2 = normalize_jet(jet.value, jet.d1, jet.d2)
    return VectorJet(grid=jet.grid, value=n0, d1=n1, d2=n2)


class VersorFieldOnCurve(ArrayModel):
    """Versor field xi along a sampled curve."""

    curve: SampledCurve
    xi: VectorJet

    @property
    def grid(self) -> Grid:
        return self.curve.grid


def _first_below(values: np.ndarray, threshold: float) -> int | None:
    bad = np.nonzero(values < threshold)[0]
    return int(bad[0]) if bad.size else None


def frenet_of_versor_field(
    vf: VersorFieldOnCurve,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> FrenetData:
    """Frenet frame (xi1, xi2, xi3), curvature K1, torsion K2 and a_i of a versor field."""
    xi, d1, d2 = vf.xi.value, vf.xi.d1, vf.xi.derivative(2)
    k1 = rownorm(d1)
    node = _first_below(k1, tol.k_min)
    if node is not None:
        raise VanishingCurvature(
            "Versor field curvature vanishes; the field is parallel there",
            node=node,
            K1=float(k1[node]),
        )

    xi2 = d1 / k1[:, None]
    dxi2 = d2 / k1[:, None] - d1 * (rowdot(d1, d2) / k1**3)[:, None]
    xi3 = np.cross(xi, xi2)
    k2 = rowdot(dxi2, xi3)

    alpha = vf.curve.tangent
    a = np.column_stack([rowdot(alpha, xi), rowdot(alpha, xi2), rowdot(alpha, xi3)])
    frames = np.stack([xi, xi2, xi3], axis=1)
    logger.debug("Frenet apparatus computed", nodes=vf.grid.n, K1_min=float(k1.min()))
    return FrenetData(
        grid=vf.grid,
        positions=vf.curve.positions,
        frames=frames,
        K1=k1,
        K2=k2,
        a=a,
    )


def _profile_samples(
    profile: Mapping[str, ScalarFunction | np.ndarray],
    names: Sequence[str],
    grid: Grid,
) -> tuple[np.ndarray, Callable[[float], np.ndarray] | None]:
    """Node samples of named profile entries, plus an exact callable if all are expressions."""
    missing = [name for name in names if name not in profile]
    if missing:
        raise SchemaError(f"Profile misses {missing[0]!r}", pointer=f"/profile/{missing[0]}")

    def sample(entry: ScalarFunction | np.ndarray, at: Any) -> Any:
        if isinstance(entry, ScalarFunction):
            return entry.eval({"s": at})
        return entry

    samples = np.column_stack([_column(sample(profile[name], grid.s), grid.n) for name in names])
    if not all(isinstance(profile[name], ScalarFunction) and not profile[name].is_sampled for name in names):  # type: ignore[union-attr]
        return samples, None

    def exact(s: float) -> np.ndarray:
        return np.array([float(profile[name].eval({"s": s})) for name in names])  # type: ignore[union-attr]

    return samples, exact


def check_unit_profile(samples: np.ndarray, pointer: str) -> None:
    defect = np.abs(rowdot(samples, samples) - 1.0)
    bad = np.nonzero(defect > PROFILE_NORM_TOL)[0]
    if bad.size:
        raise SchemaError(
            "Velocity components are not unit length",
            pointer=pointer,
            node=int(bad[0]),
        )


def evolve_profile(
    profile: Mapping[str, ScalarFunction | np.ndarray],
    coefficient_names: tuple[str | None, str | None, str | None],
    velocity_names: tuple[str, str, str],
    init: Frame,
    grid: Grid,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> FramedCurve:
    """Integrate the frame equations whose generator and velocity are profile entries.

    A `None` coefficient name stands for an identically zero coefficient.
    """
    named = [name for name in coefficient_names if name is not None]
    coeff_samples, coeff_exact = _profile_samples(profile, named, grid)
    vel_samples, vel_exact = _profile_samples(profile, velocity_names, grid)
    check_unit_profile(vel_samples, f"/profile/{velocity_names[0]}")
    slots = [named.index(name) if name is not None else None for name in coefficient_names]

    def spread(values: np.ndarray) -> np.ndarray:
        zero = np.zeros(values.shape[:-1])
        return np.stack([values[..., k] if k is not None else zero for k in slots], axis=-1)

    if coeff_exact is not None and vel_exact is not None:
        c_fn = coeff_exact
        return evolve_frame(lambda s: spread(c_fn(s)), vel_exact, init, grid, tol.ortho)
    return evolve_frame(spread(coeff_samples), vel_samples, init, grid, tol.ortho)


def reconstruct_versor_field(
    profile: Mapping[str, ScalarFunction | np.ndarray],
    init: Frame,
    grid: Grid,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[FramedCurve, np.ndarray]:
    """Curve and versor field with prescribed K1, K2, a1, a2, a3."""
    k1_samples, _ = _profile_samples(profile, ("K1",), grid)
    node = _first_below(k1_samples[:, 0], tol.k_min)
    if node is not None:
        raise VanishingCurvature("Prescribed K1 below k_min", node=node)

    curve = evolve_profile(profile, ("K1", None, "K2"), ("a1", "a2", "a3"), init, grid, tol)
    logger.info("Versor field reconstructed", nodes=grid.n, endpoint_gap=curve.endpoint_gap())
    return curve, curve.frames[:, 0].copy()


def versor_field_from_framed(curve: FramedCurve, row: int = 0) -> VersorFieldOnCurve:
    """Versor field given by one row of the frames of a framed curve."""
    sampled = SampledCurve.from_samples(curve.positions, curve.grid)
    return VersorFieldOnCurve(curve=sampled, xi=stencil_jet(curve.frames[:, row], curve.grid))


def versor_concurrence(
    fd: FrenetData,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict[str, Any]:
    """Residuals of the concurrence criterion d/ds(a2/K1) = a1, a3 = 0."""
    residual_ode = derivative(fd.a[:, 1] / fd.K1, fd.grid) - fd.a[:, 0]
    residual_a3 = fd.a[:, 2].copy()
    concurrent = bool(
        np.max(np.abs(residual_ode)) <= tol.predicate
        and np.max(np.abs(residual_a3)) <= tol.predicate,
    )
    return {"residual_ode": residual_ode, "residual_a3": residual_a3, "concurrent": concurrent}


def ruled_classification(
    vf: VersorFieldOnCurve,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict[str, bool]:
    """Cylinder, director-plane and developable flags of the ruled surface (C, xi).

    Nodes where the field is parallel (K1 <= k_min) satisfy the director-plane
    and developable conditions trivially; K2 and a3 are tested on the others.
    """
    xi, d1, d2 = vf.xi.value, vf.xi.d1, vf.xi.derivative(2)
    k1 = rownorm(d1)
    framed = k1 > tol.k_min
    if not framed.any():
        return {"cylinder": True, "director_plane": True, "developable": True}

    # xi3 = xi x xi' / K1, so K2 = <xi'', xi3> / K1 and a3 = <alpha, xi3>
    binormal = np.cross(xi[framed], d1[framed]) / k1[framed, None]
    k2 = rowdot(d2[framed], binormal) / k1[framed]
    a3 = rowdot(vf.curve.tangent[framed], binormal)
    logger.debug("Ruled surface classified", nodes=vf.grid.n, parallel_nodes=int((~framed).sum()))
    return {
        "cylinder": False,
        "director_plane": bool(np.max(np.abs(k2)) <= tol.k_min),
        "developable": bool(np.max(np.abs(a3)) <= tol.k_min),
    }


def spherical_image(
    fd: FrenetData,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict[str, Any]:
    """Arclength s*, image points and geodesic curvature of the spherical image."""
    sstar = cumulative_quadrature(fd.K1, fd.grid)
    kg = fd.K2 / fd.K1
    return {
        "sstar": sstar,
        "image": fd.frames[:, 0].copy(),
        "kg_image": kg,
        "great_circle": bool(np.max(np.abs(kg)) <= tol.predicate),
    }


def image_length(fd: FrenetData) -> float:
    """Arclength of the spherical image measured from the image samples alone."""
    speed = rownorm(derivative(fd.frames[:, 0], fd.grid))
    return quadrature(speed, fd.grid)


def space_curve_invariants(
    curve: SampledCurve,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> FrenetData:
    """Curvature (K1) and torsion (K2) of the curve: Frenet data of its tangent field."""
    return frenet_of_versor_field(VersorFieldOnCurve(curve=curve, xi=curve.tangent_jet()), tol)


def plane_field_invariants(
    curve: SampledCurve,
    nu: VectorJet,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> PlaneFieldData:
    """chi1, chi2, b_i of the plane field with unit normal nu."""
    chi1 = rownorm(nu.d1)
    if _first_below(chi1, tol.k_min) is not None:
        logger.info("Plane field not framed", chi1_min=float(chi1.min()))
        return PlaneFieldData(grid=curve.grid, positions=curve.positions, chi1=chi1, framed=False)

    fd = frenet_of_versor_field(VersorFieldOnCurve(curve=curve, xi=nu), tol)
    return PlaneFieldData(
        grid=curve.grid,
        positions=curve.positions,
        chi1=fd.K1,
        framed=True,
        frames=fd.frames,
        chi2=fd.K2,
        b=fd.a,
    )


PLANE_PREDICATES = (
    "lines_cross_curve",
    "planes_parallel",
    "characteristic_lines_parallel",
    "nu3_concurrent",
    "orthogonal_trajectory",
)


def plane_field_predicates(
    pf: PlaneFieldData,
    tol: Tolerances = DEFAULT_TOLERANCES,
    requested: Sequence[str] | None = None,
) -> dict[str, bool]:
    """Characteristic-line predicates of a plane field.

    Without a frame (vanishing chi1 somewhere) only `planes_parallel` can be
    answered; asking for another predicate raises VanishingCurvature.
    """
    eps = tol.predicate
    parallel = bool(np.max(pf.chi1) <= eps)
    if not pf.framed or pf.b is None or pf.chi2 is None:
        others = [name for name in (requested or ()) if name != "planes_parallel"]
        if others:
            raise VanishingCurvature(
                f"Predicate {others[0]!r} needs a framed plane field",
                node=int(np.argmin(pf.chi1)),
            )
        return {"planes_parallel": parallel}

    b1, b2, b3 = pf.b[:, 0], pf.b[:, 1], pf.b[:, 2]
    crossing = bool(np.max(np.abs(b1)) <= eps)
    lines_parallel = bool(np.max(np.abs(pf.chi2)) <= eps)
    if float(np.min(np.abs(pf.chi2))) > tol.k_min:
        residual = b3 + derivative(b2 / pf.chi2, pf.grid)
        concurrent = crossing and bool(np.max(np.abs(residual)) <= eps)
    else:
        concurrent = False
    result = {
        "lines_cross_curve": crossing,
        "planes_parallel": parallel,
        "characteristic_lines_parallel": lines_parallel,
        "nu3_concurrent": concurrent,
        "orthogonal_trajectory": bool(np.max(np.abs(b3)) <= eps),
    }
    if requested is not None:
        return {name: result[name] for name in requested}
    return result
