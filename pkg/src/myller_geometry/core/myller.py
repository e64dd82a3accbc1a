"""Myller configurations: Darboux frame, invariants, transport and the Krein formula."""

from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np
import structlog

from myller_geometry.config import DEFAULT_TOLERANCES, Tolerances
from myller_geometry.core.expr import ScalarFunction
from myller_geometry.core.fields import (
    SampledCurve,
    VersorFieldOnCurve,
    evolve_profile,
    plane_field_invariants,
    space_curve_invariants,
    stencil_jet,
)
from myller_geometry.core.kernel import (
    derivative,
    quadrature,
    rk4_integrate,
    rowdot,
    triple,
    unwrap_angle,
)
from myller_geometry.errors import (
    NotAConfiguration,
    NotClosed,
    NotTangent,
    PoleOnImage,
    VanishingCurvature,
    VanishingG,
)
from myller_geometry.models import (
    CurveInvariants,
    DarbouxData,
    Frame,
    FramedCurve,
    FrenetData,
    Grid,
    PlaneFieldData,
    VectorJet,
)
from myller_geometry.models.geometry import ArrayModel

logger = structlog.get_logger()

IN_PLANE_TOL = 1e-8
CLOSED_TOL = 1e-8
JACOBI_TOL = 1e-5
POLE_CLEARANCE = 0.1

# (pole, a, b) with (a, b, pole) right-handed, tried in this order
POLES = (
    ((0.0, 0.0, 1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
    ((0.0, 0.0, -1.0), (0.0, 1.0, 0.0), (1.0, 0.0, 0.0)),
    ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
    ((-1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (0.0, 1.0, 0.0)),
    ((0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (1.0, 0.0, 0.0)),
    ((0.0, -1.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
)


class MyllerConfig(ArrayModel):
    """Curve with a versor field xi lying in the plane field of normal nu."""

    curve: SampledCurve
    xi: VectorJet
    nu: VectorJet
    tangent: bool

    @property
    def grid(self) -> Grid:
        return self.curve.grid

    @classmethod
    def build(
        cls,
        curve: SampledCurve,
        xi: VectorJet,
        nu: VectorJet,
    ) -> "MyllerConfig":
        """Validate xi in pi(s) at every node and set the tangent flag."""
        off_plane = np.abs(rowdot(xi.value, nu.value))
        bad = np.nonzero(off_plane > IN_PLANE_TOL)[0]
        if bad.size:
            raise NotAConfiguration(
                "Versor field leaves the plane field",
                node=int(bad[0]),
                xi_dot_nu=float(off_plane[bad[0]]),
            )
        tangent = bool(np.max(np.abs(rowdot(curve.tangent, nu.value))) <= IN_PLANE_TOL)
        return cls(curve=curve, xi=xi, nu=nu, tangent=tangent)

    @classmethod
    def from_functions(
        cls,
        curve: SampledCurve,
        xi: Sequence[ScalarFunction],
        nu: Sequence[ScalarFunction],
    ) -> "MyllerConfig":
        return cls.build(
            curve,
            curve.field_jet(xi, pointer="/xi"),
            curve.field_jet(nu, pointer="/nu"),
        )

    @classmethod
    def from_framed(cls, framed: FramedCurve) -> "MyllerConfig":
        """Configuration (xi = e1, nu = e3) carried by a framed curve."""
        curve = SampledCurve.from_samples(framed.positions, framed.grid)
        return cls.build(
            curve,
            stencil_jet(framed.frames[:, 0], framed.grid),
            stencil_jet(framed.frames[:, 2], framed.grid),
        )

    def versor_field(self) -> VersorFieldOnCurve:
        return VersorFieldOnCurve(curve=self.curve, xi=self.xi)

    def plane_field(self, tol: Tolerances = DEFAULT_TOLERANCES) -> PlaneFieldData:
        return plane_field_invariants(self.curve, self.nu, tol)


def darboux_invariants(cfg: MyllerConfig) -> DarbouxData:
    """Darboux frame (xi, mu, nu), projections c_i and invariants G, K, T."""
    xi, dxi = cfg.xi.value, cfg.xi.d1
    nu, dnu = cfg.nu.value, cfg.nu.d1
    mu = np.cross(nu, xi)
    alpha = cfg.curve.tangent

    g = triple(xi, dxi, nu)
    k = rowdot(dxi, nu)
    t = triple(xi, nu, dnu)
    c = np.column_stack([rowdot(alpha, xi), rowdot(alpha, mu), rowdot(alpha, nu)])
    return DarbouxData(
        grid=cfg.grid,
        positions=cfg.curve.positions,
        frames=np.stack([xi, mu, nu], axis=1),
        c=c,
        G=g,
        K=k,
        T=t,
        tangent=cfg.tangent,
    )


def reconstruct_configuration(
    profile: Mapping[str, ScalarFunction | np.ndarray],
    init: Frame,
    grid: Grid,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> FramedCurve:
    """Configuration with prescribed c1, c2, c3, G, K, T, up to a proper motion."""
    curve = evolve_profile(profile, ("G", "K", "T"), ("c1", "c2", "c3"), init, grid, tol)
    logger.info("Configuration reconstructed", nodes=grid.n, endpoint_gap=curve.endpoint_gap())
    return curve


def frame_equation_residual(cfg: MyllerConfig, dd: DarbouxData) -> np.ndarray:
    """|dxi/ds - (G mu + K nu)| per node."""
    predicted = dd.G[:, None] * dd.mu + dd.K[:, None] * dd.nu
    return np.linalg.norm(cfg.xi.d1 - predicted, axis=1)


def second_derivative_residual(cfg: MyllerConfig, dd: DarbouxData) -> np.ndarray:
    """|d2xi/ds2 - [(-G^2-K^2) xi + (G' - KT) mu + (K' + GT) nu]| per node."""
    dg = derivative(dd.G, dd.grid)
    dk = derivative(dd.K, dd.grid)
    predicted = (
        (-dd.G**2 - dd.K**2)[:, None] * dd.xi
        + (dg - dd.K * dd.T)[:, None] * dd.mu
        + (dk + dd.G * dd.T)[:, None] * dd.nu
    )
    return np.linalg.norm(cfg.xi.derivative(2) - predicted, axis=1)


def finite_angle_quotients(dd: DarbouxData, node: int, offsets: Sequence[int]) -> np.ndarray:
    """Rows (ds, dpsi1/ds, dpsi2/ds, dpsi3/ds) for the given node offsets.

    dpsi1 turns xi inside pi(s), dpsi2 turns xi towards nu, dpsi3 turns nu
    about xi; the quotients tend to G, K and T.
    """
    xi, mu, nu = dd.frames[node]
    rows = []
    for k in offsets:
        ds = k * dd.grid.h
        xi1, nu1 = dd.xi[node + k], dd.nu[node + k]
        rows.append(
            (
                ds,
                np.arctan2(np.dot(xi1, mu), np.dot(xi1, xi)) / ds,
                np.arctan2(np.dot(xi1, nu), np.dot(xi1, xi)) / ds,
                np.arctan2(-np.dot(nu1, mu), np.dot(nu1, nu)) / ds,
            ),
        )
    return np.array(rows)


def parallel_relations(dd: DarbouxData, tol: Tolerances = DEFAULT_TOLERANCES) -> dict[str, bool]:
    """Myller-parallel (G = 0), conjugate (K = 0) and principal (T = 0) flags."""
    eps = tol.predicate
    return {
        "parallel": bool(np.max(np.abs(dd.G)) <= eps),
        "conjugate": bool(np.max(np.abs(dd.K)) <= eps),
        "principal": bool(np.max(np.abs(dd.T)) <= eps),
    }


def frenet_relation(
    cfg: MyllerConfig,
    dd: DarbouxData,
    fd: FrenetData,
) -> dict[str, Any]:
    """Angle phi between xi2 and nu and the relations G = K1 sin phi, K = K1 cos phi, T = K2 + phi'."""
    xi2 = fd.frames[:, 1]
    phi = unwrap_angle(np.arctan2(rowdot(xi2, dd.mu), rowdot(xi2, dd.nu)))
    dphi = derivative(phi, dd.grid)
    applicable = np.abs(dd.K) > IN_PLANE_TOL
    meusnier = np.full(dd.grid.n, np.nan)
    meusnier[applicable] = np.cos(phi[applicable]) / dd.K[applicable] - 1.0 / fd.K1[applicable]
    return {
        "phi": phi,
        "residual_G": dd.G - fd.K1 * np.sin(phi),
        "residual_K": dd.K - fd.K1 * np.cos(phi),
        "residual_T": dd.T - (fd.K2 + dphi),
        "meusnier_residual": meusnier,
        "meusnier_applicable": applicable,
    }


def meusnier_center(fd: FrenetData, dd: DarbouxData) -> dict[str, np.ndarray]:
    """Curvature centers r + xi2/K1 of the field and their normal projections nu/K."""
    centers = fd.positions + fd.frames[:, 1] / fd.K1[:, None]
    projected = np.full((dd.grid.n, 3), np.nan)
    applicable = np.abs(dd.K) > IN_PLANE_TOL
    projected[applicable] = dd.positions[applicable] + dd.nu[applicable] / dd.K[applicable, None]
    return {"center": centers, "normal_center": projected}


def normal_relation(
    dd: DarbouxData,
    pf: PlaneFieldData,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict[str, Any]:
    """Angle sigma between xi and nu3 with K = chi1 sin sigma, T = chi1 cos sigma, G = chi2 + sigma'."""
    k2t2 = dd.K**2 + dd.T**2 - pf.chi1**2
    result: dict[str, Any] = {
        "k2t2_residual": k2t2,
        "conjugate": bool(np.max(np.abs(dd.K)) <= tol.predicate),
        "abs_T_is_chi1": bool(np.max(np.abs(np.abs(dd.T) - pf.chi1)) <= tol.predicate),
    }
    if not pf.framed or pf.frames is None or pf.chi2 is None:
        result["sigma"] = None
        return result

    nu2, nu3 = pf.frames[:, 1], pf.frames[:, 2]
    sigma = unwrap_angle(np.arctan2(-rowdot(dd.xi, nu2), rowdot(dd.xi, nu3)))
    dsigma = derivative(sigma, dd.grid)
    result.update(
        {
            "sigma": sigma,
            "residual_K": dd.K - pf.chi1 * np.sin(sigma),
            "residual_T": dd.T - pf.chi1 * np.cos(sigma),
            "residual_G": dd.G - (pf.chi2 + dsigma),
        },
    )
    return result


def _rotation_rhs(s: float, v: np.ndarray, rate: float) -> np.ndarray:
    return np.array([rate * v[1], -rate * v[0]])


def rotation_transport(rate: np.ndarray, grid: Grid, V0: Sequence[float]) -> np.ndarray:
    """Solve dV1/ds = rate V2, dV2/ds = -rate V1 from V0."""
    return rk4_integrate(_rotation_rhs, np.asarray(V0, dtype=float), grid, rate)


def myller_transport(dd: DarbouxData, V0: Sequence[float]) -> np.ndarray:
    """Components (V1, V2) on (xi, mu) of a vector parallel in Myller sense."""
    return rotation_transport(dd.G, dd.grid, V0)


def transported_vectors(dd: DarbouxData, components: np.ndarray) -> np.ndarray:
    """Spatial vectors V1 xi + V2 mu."""
    return components[:, :1] * dd.xi + components[:, 1:2] * dd.mu


def rotation_angle(start: np.ndarray, end: np.ndarray, metric: np.ndarray | None = None) -> float:
    """Signed angle from `start` to `end` in a 2D (possibly non-Euclidean) metric."""
    g = np.eye(2) if metric is None else metric
    dot = float(start @ g @ end)
    area = float(np.sqrt(np.linalg.det(g)) * (start[0] * end[1] - start[1] * end[0]))
    return float(np.arctan2(area, dot))


def _check_G(dd: DarbouxData) -> None:
    small = np.nonzero(np.abs(dd.G) < IN_PLANE_TOL)[0]
    if small.size:
        raise VanishingG("Geodesic curvature of the field vanishes", node=int(small[0]))


def adjoint_curve(dd: DarbouxData) -> np.ndarray:
    """Adjoint points R = r - (c2/G) xi."""
    _check_G(dd)
    return dd.positions - (dd.c[:, 1] / dd.G)[:, None] * dd.xi


def myller_concurrence(dd: DarbouxData, tol: Tolerances = DEFAULT_TOLERANCES) -> dict[str, Any]:
    """Residual of d/ds(c2/G) = c1; concurrent when it vanishes."""
    _check_G(dd)
    residual = derivative(dd.c[:, 1] / dd.G, dd.grid) - dd.c[:, 0]
    return {"residual": residual, "concurrent": bool(np.max(np.abs(residual)) <= tol.predicate)}


def _polar_area(image: np.ndarray, grid: Grid) -> tuple[float, np.ndarray]:
    for pole, a, b in POLES:
        p = np.asarray(pole)
        cos_theta = np.clip(image @ p, -1.0, 1.0)
        if np.min(np.arccos(cos_theta)) <= POLE_CLEARANCE:
            continue
        phi = unwrap_angle(np.arctan2(image @ np.asarray(b), image @ np.asarray(a)))
        turns = (phi[-1] - phi[0]) / (2.0 * np.pi)
        if abs(abs(turns) - 1.0) > 1e-6:
            continue
        omega = 2.0 * np.pi - quadrature(cos_theta * derivative(phi, grid), grid)
        return omega, p
    raise PoleOnImage("No admissible pole for the spherical image")


def krein_area(
    cfg: MyllerConfig,
    dd: DarbouxData,
    pf: PlaneFieldData,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict[str, Any]:
    """Area bounded by the spherical image of nu, directly and by the Krein formula.

    The image must bound a simply connected region; that hypothesis cannot
    be checked locally and is left to the caller.
    """
    positions = cfg.curve.positions
    diameter = float(np.linalg.norm(positions.max(axis=0) - positions.min(axis=0)))
    gap = float(np.linalg.norm(positions[-1] - positions[0]))
    if gap > CLOSED_TOL * max(diameter, 1.0):
        raise NotClosed("Configuration is not closed", endpoint_gap=gap)

    omega_direct, pole = _polar_area(dd.nu, dd.grid)
    relation = normal_relation(dd, pf, tol)
    if relation["sigma"] is None:
        raise VanishingCurvature("Plane field has no frame; sigma undefined", node=int(np.argmin(pf.chi1)))
    net_sigma = float(relation["sigma"][-1] - relation["sigma"][0])
    omega_formula = 2.0 * np.pi - quadrature(dd.G, dd.grid) + net_sigma
    logger.info(
        "Krein area computed",
        omega_direct=omega_direct,
        omega_formula=omega_formula,
        pole=pole.tolist(),
    )
    return {
        "omega_direct": omega_direct,
        "omega_formula": omega_formula,
        "net_sigma": net_sigma,
        "sigma_winding": int(round(net_sigma / (2.0 * np.pi))),
        "jacobi_flag": bool(abs(omega_direct - 2.0 * np.pi) <= JACOBI_TOL),
    }


def _check_tangent(alpha: np.ndarray, nu: np.ndarray) -> None:
    off = np.abs(rowdot(alpha, nu))
    bad = np.nonzero(off > IN_PLANE_TOL)[0]
    if bad.size:
        raise NotTangent("Curve tangent leaves the plane field", node=int(bad[0]), alpha_dot_nu=float(off[bad[0]]))


def tangent_curve_invariants(
    curve: SampledCurve,
    nu: VectorJet,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict[str, Any]:
    """kappa_g, kappa_n, tau_g of a curve in a tangent configuration, with their relations."""
    _check_tangent(curve.tangent, nu.value)
    cfg = MyllerConfig.build(curve, curve.tangent_jet(), nu)
    dd = darboux_invariants(cfg)
    ci = CurveInvariants(grid=curve.grid, kappa_g=dd.G, kappa_n=dd.K, tau_g=dd.T)
    result: dict[str, Any] = {
        "invariants": ci,
        "darboux": dd,
        "classification": ci.classification(tol.predicate),
        "phi_star": None,
    }

    try:
        fd = space_curve_invariants(curve, tol)
    except VanishingCurvature:
        logger.debug("Curve curvature vanishes; phi* relations skipped")
    else:
        relation = frenet_relation(cfg, dd, fd)
        result["phi_star"] = relation["phi"]
        result["relations"] = {
            "kappa_g": relation["residual_G"],
            "kappa_n": relation["residual_K"],
            "tau_g": relation["residual_T"],
        }

    pf = cfg.plane_field(tol)
    if pf.framed:
        plane = normal_relation(dd, pf, tol)
        result["plane_relations"] = {
            "kappa_n": plane["residual_K"],
            "tau_g": plane["residual_T"],
            "kappa_g": plane["residual_G"],
            "k2t2": plane["k2t2_residual"],
        }
    return result


def tangent_field_relations(
    dd: DarbouxData,
    ci: CurveInvariants,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict[str, Any]:
    """Angle lambda between alpha and xi and the relations between (G, K, T) and the curve invariants."""
    if not dd.tangent or np.max(np.abs(dd.c[:, 2])) > IN_PLANE_TOL:
        raise NotTangent("Configuration is not tangent", c3_max=float(np.max(np.abs(dd.c[:, 2]))))

    alpha = dd.c[:, :1] * dd.xi + dd.c[:, 1:2] * dd.mu + dd.c[:, 2:] * dd.nu
    mu_star = np.cross(dd.nu, alpha)
    lam = unwrap_angle(np.arctan2(rowdot(dd.xi, mu_star), rowdot(dd.xi, alpha)))
    dlam = derivative(lam, dd.grid)
    kn, tg = ci.kappa_n, ci.tau_g

    result: dict[str, Any] = {
        "lambda": lam,
        "residual_K": dd.K - (kn * np.cos(lam) + tg * np.sin(lam)),
        "residual_T": dd.T - (-kn * np.sin(lam) + tg * np.cos(lam)),
        "residual_G": dd.G - (ci.kappa_g + dlam),
        "residual_K2T2": dd.K**2 + dd.T**2 - (kn**2 + tg**2),
        "bortolotti_angle": None,
    }
    if np.max(np.abs(dd.K)) <= tol.predicate:
        angle = np.full(dd.grid.n, np.nan)
        defined = np.abs(tg) > IN_PLANE_TOL
        angle[defined] = np.arctan(-kn[defined] / tg[defined])
        result["bortolotti_angle"] = angle
    return result
