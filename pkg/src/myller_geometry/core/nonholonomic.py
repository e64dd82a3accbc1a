"""Plane distributions in space given by a Pfaff form X dx + Y dy + Z dz.

Everything is pointwise: the adapted frame (I1, I2, I3) at a point, with
I3 the unit normal of the distribution and I1 the projection of a
reference axis, and the rotation coefficients obtained from the Jacobian
of (X, Y, Z) by the quotient rule.
"""

from collections.abc import Callable, Sequence
from typing import Any, NamedTuple

import numpy as np
import structlog

from myller_geometry.config import DEFAULT_TOLERANCES, Tolerances
from myller_geometry.core.expr import ScalarFunction
from myller_geometry.core.fields import SampledCurve, stencil_jet
from myller_geometry.core.kernel import derivative, rk4_integrate, rowdot, unwrap_angle
from myller_geometry.core.myller import (
    MyllerConfig,
    darboux_invariants,
    normal_relation,
    rotation_transport,
)
from myller_geometry.core.surface import polar_indicatrix
from myller_geometry.errors import (
    DegenerateFrame,
    GaugeDegenerate,
    IndeterminateDirections,
    NonholonomyViolated,
    NotTangentToDistribution,
)
from myller_geometry.models import Frame, FramedCurve, Grid, NhInvariants, RotationCoefficients
from myller_geometry.models.geometry import ArrayModel

logger = structlog.get_logger()

VARIABLES = ("x", "y", "z")
DEFAULT_AXES = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

NORMAL_MIN = 1e-10
TANGENCY_TOL = 1e-6
INTEGRABLE_TOL = 1e-7
SPECIAL_TOL = 1e-6
PLANE_TM_MIN = 1e-3
DEGENERATE_TOL = 1e-9
REGAUGE_COS = 0.9

PfaffFunction = Callable[[np.ndarray], np.ndarray]


class PfaffForm(ArrayModel):
    """Coefficients (X, Y, Z) of the form, as expressions in x, y, z or as a callable."""

    funcs: tuple[ScalarFunction, ScalarFunction, ScalarFunction] | None = None
    fn: PfaffFunction | None = None
    fd_step: float = DEFAULT_TOLERANCES.fd_step

    def value(self, point: np.ndarray) -> np.ndarray:
        if self.funcs is not None:
            bindings = dict(zip(VARIABLES, point, strict=True))
            return np.array([float(f.eval(bindings)) for f in self.funcs])
        assert self.fn is not None
        return np.asarray(self.fn(point), dtype=float)

    def jacobian(self, point: np.ndarray) -> np.ndarray:
        """J[a, b] = d(X, Y, Z)_a / d(x, y, z)_b."""
        if self.funcs is not None:
            bindings = dict(zip(VARIABLES, point, strict=True))
            return np.array(
                [[float(f.eval_dual(bindings, var)[1]) for var in VARIABLES] for f in self.funcs],
            )
        assert self.fn is not None
        h = self.fd_step * max(1.0, float(np.linalg.norm(point)))
        columns = []
        for k in range(3):
            step = np.zeros(3)
            step[k] = h
            columns.append((self.value(point + step) - self.value(point - step)) / (2.0 * h))
        return np.column_stack(columns)


def pfaff_from_expressions(X: ScalarFunction, Y: ScalarFunction, Z: ScalarFunction) -> PfaffForm:
    return PfaffForm(funcs=(X, Y, Z))


def pfaff_from_callable(fn: PfaffFunction, fd_step: float = DEFAULT_TOLERANCES.fd_step) -> PfaffForm:
    """Form from a callable point -> (X, Y, Z); derivatives by central differences."""
    return PfaffForm(fn=fn, fd_step=fd_step)


class DistributionField(ArrayModel):
    """Distribution orthogonal to the Pfaff normal, with the gauge axis for I1."""

    pfaff: PfaffForm
    axis: tuple[float, float, float] | None = None
    tol: Tolerances = DEFAULT_TOLERANCES

    def resolve_axis(self, point: np.ndarray) -> np.ndarray:
        """Reference axis usable at `point`; defaults are tried in order."""
        normal = _unit_normal(self.pfaff.value(point))
        limit = 1.0 - self.tol.gauge
        if self.axis is not None:
            axis = np.asarray(self.axis, dtype=float)
            axis = axis / np.linalg.norm(axis)
            if abs(float(axis @ normal)) > limit:
                raise GaugeDegenerate(
                    "Reference axis is nearly normal to the distribution",
                    point=point.tolist(),
                )
            return axis
        for candidate in DEFAULT_AXES:
            axis = np.asarray(candidate)
            if abs(float(axis @ normal)) <= limit:
                return axis
        raise GaugeDegenerate("No default axis usable", point=point.tolist())


def _unit_normal(w: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(w))
    if norm < NORMAL_MIN:
        raise DegenerateFrame("Pfaff form vanishes", norm=norm)
    return w / norm


class LocalFrame(NamedTuple):
    frame: np.ndarray
    coefficients: RotationCoefficients


def _local_frame(D: DistributionField, point: Any, axis: np.ndarray | None = None) -> LocalFrame:
    p = np.asarray(point, dtype=float)
    a = D.resolve_axis(p) if axis is None else axis
    w = D.pfaff.value(p)
    jac = D.pfaff.jacobian(p)
    norm = float(np.linalg.norm(w))
    n = _unit_normal(w)
    proj = a - (a @ n) * n
    proj_norm = float(np.linalg.norm(proj))
    if proj_norm <= np.sqrt(D.tol.gauge):
        raise GaugeDegenerate("Reference axis is nearly normal to the distribution", point=p.tolist())
    i1 = proj / proj_norm
    i2 = np.cross(n, i1)

    def d_normal(e: np.ndarray) -> np.ndarray:
        dw = jac @ e
        return (dw - n * (n @ dw)) / norm

    def d_first(e: np.ndarray, dn: np.ndarray) -> np.ndarray:
        dproj = -((a @ dn) * n + (a @ n) * dn)
        return (dproj - i1 * (i1 @ dproj)) / proj_norm

    dn1, dn2 = d_normal(i1), d_normal(i2)
    rc = RotationCoefficients(
        p1=float(-(dn1 @ i2)),
        p2=float(-(dn2 @ i2)),
        q1=float(dn1 @ i1),
        q2=float(dn2 @ i1),
        r1=float(d_first(i1, dn1) @ i2),
        r2=float(d_first(i2, dn2) @ i2),
    )
    return LocalFrame(np.vstack([i1, i2, n]), rc)


def adapted_frame(D: DistributionField, point: Any) -> Frame:
    """(I1, I2, I3) at a point."""
    local = _local_frame(D, point)
    return Frame.from_matrix(np.asarray(point, dtype=float), local.frame)


def rotation_coefficients(D: DistributionField, point: Any) -> RotationCoefficients:
    return _local_frame(D, point).coefficients


def scalar_invariants(D: DistributionField, point: Any) -> NhInvariants:
    """Mean torsion, mean curvature, total, gaussian and total-torsion curvatures."""
    return NhInvariants.from_coefficients(rotation_coefficients(D, point))


def rotate_frame(rc: RotationCoefficients, angle: float) -> RotationCoefficients:
    """Coefficients of the frame turned by `angle` inside the distribution plane."""
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    d = rot.T @ np.array([[rc.q1, rc.q2], [-rc.p1, -rc.p2]]) @ rot
    r = rot.T @ np.array([rc.r1, rc.r2])
    return RotationCoefficients(
        p1=float(-d[1, 0]),
        p2=float(-d[1, 1]),
        q1=float(d[0, 0]),
        q2=float(d[0, 1]),
        r1=float(r[0]),
        r2=float(r[1]),
    )


def probe_lattice(box: Sequence[Sequence[float]], probe: int = 3) -> np.ndarray:
    """probe^3 points spanning the box."""
    axes = [np.linspace(lo, hi, probe) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def integrability(D: DistributionField, points: np.ndarray) -> dict[str, Any]:
    """Mean torsion at each probe; the distribution is integrable when it vanishes."""
    tm = np.array([scalar_invariants(D, p).Tm for p in points])
    return {"Tm": tm, "integrable": bool(np.max(np.abs(tm)) <= INTEGRABLE_TOL)}


def is_nonholonomic(D: DistributionField, point: Any = (0.0, 0.0, 0.0)) -> dict[str, Any]:
    """<w, curl w> for w = (X, Y, Z); nonzero means not integrable near the point."""
    p = np.asarray(point, dtype=float)
    jac = D.pfaff.jacobian(p)
    curl = np.array([jac[2, 1] - jac[1, 2], jac[0, 2] - jac[2, 0], jac[1, 0] - jac[0, 1]])
    value = float(D.pfaff.value(p) @ curl)
    return {"w_dot_curl": value, "nonholonomic": abs(value) > D.tol.predicate}


def direction_quantities(rc: RotationCoefficients, w1: Any, w2: Any) -> dict[str, Any]:
    """phi, psi, chi, Theta, kappa_n and tau_g of the direction w1 I1 + w2 I2."""
    phi = w1**2 + w2**2
    psi = rc.p2 * w2**2 + (rc.p1 - rc.q2) * w1 * w2 - rc.q1 * w1**2
    chi = rc.p1 * w1**2 + (rc.p2 + rc.q1) * w1 * w2 + rc.q2 * w2**2
    p = rc.p1 * w1 + rc.p2 * w2
    q = rc.q1 * w1 + rc.q2 * w2
    theta = p**2 + q**2
    inv = NhInvariants.from_coefficients(rc)
    return {
        "phi": phi,
        "psi": psi,
        "chi": chi,
        "theta": theta,
        "kappa_n": psi / phi,
        "tau_g": chi / phi,
        "theta_residual": theta - (inv.H * psi - inv.Kt * phi + inv.Tm * chi),
        "square_residual": psi**2 + chi**2 - theta * phi,
    }


def forms_at(D: DistributionField, point: Any, direction: Sequence[float]) -> dict[str, Any]:
    w1, w2 = (float(x) for x in direction)
    if w1 == 0.0 and w2 == 0.0:
        raise NotTangentToDistribution("Direction is zero")
    return direction_quantities(rotation_coefficients(D, point), w1, w2)


def pair_invariants(rc: RotationCoefficients, beta: Any, alpha: Any) -> tuple[Any, Any]:
    """K(beta, alpha) and T(beta, alpha) of a field at angle beta along a curve at angle alpha."""
    p = rc.p1 * np.cos(alpha) + rc.p2 * np.sin(alpha)
    q = rc.q1 * np.cos(alpha) + rc.q2 * np.sin(alpha)
    return p * np.sin(beta) - q * np.cos(beta), p * np.cos(beta) + q * np.sin(beta)


def symmetry_defects(rc: RotationCoefficients, alpha: Any, beta: Any) -> dict[str, Any]:
    """Exchanging the field and curve angles changes K by Tm sin(b - a) and T by H sin(a - b)."""
    inv = NhInvariants.from_coefficients(rc)
    k_ba, t_ba = pair_invariants(rc, beta, alpha)
    k_ab, t_ab = pair_invariants(rc, alpha, beta)
    return {
        "K_defect": k_ba - k_ab,
        "T_defect": t_ba - t_ab,
        "K_residual": (k_ba - k_ab) - inv.Tm * np.sin(beta - alpha),
        "T_residual": (t_ba - t_ab) - inv.H * np.sin(alpha - beta),
    }


def _harmonic(rc: RotationCoefficients) -> tuple[float, float, float, float]:
    """kappa_n = H/2 + a cos 2t + b sin 2t and tau_g = Tm/2 + b cos 2t - a sin 2t."""
    inv = NhInvariants.from_coefficients(rc)
    return inv.H, inv.Tm, -(rc.p2 + rc.q1) / 2.0, (rc.p1 - rc.q2) / 2.0


def _null_directions(A: float, B: float, C: float, invariant: float) -> dict[str, Any]:
    """Angles t with A cos^2 t + B cos t sin t + C sin^2 t = 0.

    The sign of `invariant` (minus a quarter of the discriminant) decides
    whether they are real.
    """
    if invariant > DEGENERATE_TOL:
        return {"kind": "imaginary", "angles": [], "all_directions": False}
    if max(abs(A), abs(B), abs(C)) <= DEGENERATE_TOL:
        return {"kind": "coincident", "angles": [], "all_directions": True}
    mean = (A + C) / 2.0
    radius = float(np.hypot((A - C) / 2.0, B / 2.0))
    phase = float(np.arctan2(B / 2.0, (A - C) / 2.0))
    opening = float(np.arccos(np.clip(-mean / radius, -1.0, 1.0)))
    if invariant >= -DEGENERATE_TOL:
        angle = float(np.mod((phase + opening) / 2.0, np.pi))
        return {"kind": "coincident", "angles": [angle], "all_directions": False}
    angles = sorted(float(np.mod((phase + sign * opening) / 2.0, np.pi)) for sign in (1.0, -1.0))
    return {"kind": "real", "angles": angles, "all_directions": False}


def _extremal_pair(b: float, a: float) -> dict[str, Any]:
    if np.hypot(a, b) <= DEGENERATE_TOL:
        return {"kind": "indeterminate", "angles": []}
    first = float(np.mod(np.arctan2(b, a) / 2.0, np.pi))
    return {"kind": "real", "angles": [first, float(np.mod(first + np.pi / 2.0, np.pi))]}


def direction_fields(D: DistributionField, point: Any) -> dict[str, Any]:
    """Asymptotic, curvature, principal and extremal-torsion directions as angles from I1."""
    rc = rotation_coefficients(D, point)
    inv = NhInvariants.from_coefficients(rc)
    _, _, a, b = _harmonic(rc)
    asymptotic = _null_directions(-rc.q1, rc.p1 - rc.q2, rc.p2, inv.Kg)
    curvature = _null_directions(rc.p1, rc.p2 + rc.q1, rc.q2, inv.Tt)
    planar = max(abs(rc.p1 - rc.q2), abs(rc.p2), abs(rc.q1)) <= DEGENERATE_TOL
    return {
        "asymptotic": asymptotic,
        "curvature": curvature,
        "principal": _extremal_pair(b, a),
        "extremal_torsion": _extremal_pair(-a, b),
        "planar_point": planar,
        "umbilic": bool(np.hypot(a, b) <= DEGENERATE_TOL),
    }


def extremal_values(D: DistributionField, point: Any) -> dict[str, float]:
    """Extreme normal curvatures 1/R1 >= 1/R2 and geodesic torsions 1/T1 >= 1/T2."""
    return _extremal_values(rotation_coefficients(D, point))


def _extremal_values(rc: RotationCoefficients) -> dict[str, float]:
    inv = NhInvariants.from_coefficients(rc)
    h, tm, a, b = _harmonic(rc)
    radius = float(np.hypot(a, b))
    values = {
        "invR1": h / 2.0 + radius,
        "invR2": h / 2.0 - radius,
        "invT1": tm / 2.0 + radius,
        "invT2": tm / 2.0 - radius,
    }
    values["sum_R_residual"] = values["invR1"] + values["invR2"] - h
    values["product_R_residual"] = values["invR1"] * values["invR2"] - inv.Kg
    values["sum_T_residual"] = values["invT1"] + values["invT2"] - tm
    values["product_T_residual"] = values["invT1"] * values["invT2"] - inv.Tt
    return values


def align_frame(rc: RotationCoefficients, target: str) -> RotationCoefficients:
    """Rotate so that I1 is the first principal (or extremal-torsion) direction."""
    _, _, a, b = _harmonic(rc)
    if np.hypot(a, b) <= DEGENERATE_TOL:
        raise IndeterminateDirections(f"{target} directions are not determined at this point")
    angle = np.arctan2(b, a) / 2.0 if target == "principal" else np.arctan2(-a, b) / 2.0
    rotated = rotate_frame(rc, float(angle))
    check = rotated.p1 - rotated.q2 if target == "principal" else rotated.p2 + rotated.q1
    logger.debug("Frame aligned", target=target, angle=float(angle), check=float(check))
    return rotated


def euler_bonnet_nh(D: DistributionField, point: Any, angles: np.ndarray) -> dict[str, Any]:
    """kappa_n and tau_g in principal and extremal-torsion axes, with their indicatrices."""
    rc = rotation_coefficients(D, point)
    ev = _extremal_values(rc)
    umbilic = bool(np.isclose(ev["invR1"], ev["invR2"], rtol=0.0, atol=DEGENERATE_TOL))
    result: dict[str, Any] = {"umbilic": umbilic, **ev}
    if not umbilic:
        principal = align_frame(rc, "principal")
        torsional = align_frame(rc, "extremal_torsion")
        result["principal_check"] = principal.p1 - principal.q2
        result["torsion_check"] = torsional.p2 + torsional.q1
    kappa = np.cos(angles) ** 2 * ev["invR1"] + np.sin(angles) ** 2 * ev["invR2"]
    tau = np.cos(angles) ** 2 * ev["invT1"] + np.sin(angles) ** 2 * ev["invT2"]
    result["kappa_n"] = kappa
    result["tau_g"] = tau
    result["dupin"] = nh_indicatrix(ev, "dupin", angles)
    result["bonnet"] = nh_indicatrix(ev, "bonnet", angles)
    return result


def nh_indicatrix(ev: dict[str, float], kind: str, angles: np.ndarray) -> dict[str, np.ndarray]:
    """Dupin or Bonnet indicatrix points with their conic residuals."""
    first, second = (ev["invR1"], ev["invR2"]) if kind == "dupin" else (ev["invT1"], ev["invT2"])
    values = np.cos(angles) ** 2 * first + np.sin(angles) ** 2 * second
    points = polar_indicatrix(angles, values, -0.5)
    points["residual"] = np.abs(points["x"] ** 2 * first + points["y"] ** 2 * second) - 1.0
    return points


def curvature_torsion_circle(D: DistributionField, point: Any, angles: np.ndarray) -> dict[str, Any]:
    """Circle traced by (kappa_n, tau_g) as the direction turns."""
    rc = rotation_coefficients(D, point)
    inv = NhInvariants.from_coefficients(rc)
    q = direction_quantities(rc, np.cos(angles), np.sin(angles))
    kn, tg = q["kappa_n"], q["tau_g"]
    radius_sq = (inv.H**2 + inv.Tm**2) / 4.0 - inv.Kt
    residual = (kn - inv.H / 2.0) ** 2 + (tg - inv.Tm / 2.0) ** 2 - radius_sq
    return {
        "center": (inv.H / 2.0, inv.Tm / 2.0),
        "radius_sq": radius_sq,
        "max_residual": float(np.max(np.abs(residual))),
        "equation_residual": float(np.max(np.abs(kn**2 + tg**2 - inv.H * kn - inv.Tm * tg + inv.Kt))),
        "imaginary": bool(radius_sq < -DEGENERATE_TOL),
        "kappa_n": kn,
        "tau_g": tg,
    }


class CurveFrames(ArrayModel):
    """Adapted frames, rotation coefficients and tangent angle along a curve."""

    frames: np.ndarray
    coefficients: np.ndarray
    alpha: np.ndarray

    def rc(self, i: int) -> RotationCoefficients:
        p1, p2, q1, q2, r1, r2 = self.coefficients[i]
        return RotationCoefficients(p1=p1, p2=p2, q1=q1, q2=q2, r1=r1, r2=r2)

    @property
    def rate(self) -> np.ndarray:
        """r1 cos alpha + r2 sin alpha."""
        return self.coefficients[:, 4] * np.cos(self.alpha) + self.coefficients[:, 5] * np.sin(self.alpha)


def curve_frames(D: DistributionField, curve: SampledCurve) -> CurveFrames:
    """Frames along a curve tangent to the distribution, with one gauge axis for all nodes."""
    axis = D.resolve_axis(curve.positions[0])
    locals_ = [_local_frame(D, p, axis) for p in curve.positions]
    frames = np.array([loc.frame for loc in locals_])
    off = np.abs(rowdot(curve.tangent, frames[:, 2]))
    bad = np.nonzero(off > TANGENCY_TOL)[0]
    if bad.size:
        raise NotTangentToDistribution(
            "Curve leaves the distribution",
            node=int(bad[0]),
            omega=float(off[bad[0]]),
        )
    coefficients = np.array(
        [[c.p1, c.p2, c.q1, c.q2, c.r1, c.r2] for c in (loc.coefficients for loc in locals_)],
    )
    alpha = unwrap_angle(
        np.arctan2(rowdot(curve.tangent, frames[:, 1]), rowdot(curve.tangent, frames[:, 0])),
    )
    return CurveFrames(frames=frames, coefficients=coefficients, alpha=alpha)


def field_gkt(
    D: DistributionField,
    curve: SampledCurve,
    beta: ScalarFunction | None = None,
) -> dict[str, Any]:
    """G, K, T of the field at angle beta from I1 along a tangent curve (beta = alpha if omitted)."""
    cf = curve_frames(D, curve)
    if beta is None:
        b, db = cf.alpha, derivative(cf.alpha, curve.grid)
    else:
        jet = curve.field_jet([beta], normalize=False, pointer="/beta")
        b, db = jet.value[:, 0], jet.d1[:, 0]

    n = curve.grid.n
    kt = np.array([pair_invariants(cf.rc(i), b[i], cf.alpha[i]) for i in range(n)])
    g = db + cf.rate

    i1, i2, i3 = cf.frames[:, 0], cf.frames[:, 1], cf.frames[:, 2]
    xi = np.cos(b)[:, None] * i1 + np.sin(b)[:, None] * i2
    cfg = MyllerConfig.build(curve, stencil_jet(xi, curve.grid), stencil_jet(i3, curve.grid))
    dd = darboux_invariants(cfg)
    return {
        "alpha": cf.alpha,
        "beta": b,
        "G": g,
        "K": kt[:, 0],
        "T": kt[:, 1],
        "triple_residual": float(
            max(
                np.max(np.abs(dd.G - g)),
                np.max(np.abs(dd.K - kt[:, 0])),
                np.max(np.abs(dd.T - kt[:, 1])),
            ),
        ),
    }


def transport_nh(D: DistributionField, curve: SampledCurve, V0: Sequence[float]) -> np.ndarray:
    """Components on (I1, I2) of a vector parallel along a tangent curve."""
    cf = curve_frames(D, curve)
    return rotation_transport(cf.rate, curve.grid, V0)


def gheorghiev_check(D: DistributionField, curve: SampledCurve) -> np.ndarray:
    """kappa_g - (dsigma/ds + chi2), sigma the angle between the curve and the plane-field frame."""
    cf = curve_frames(D, curve)
    kappa_g = derivative(cf.alpha, curve.grid) + cf.rate
    cfg = MyllerConfig.build(curve, curve.tangent_jet(), stencil_jet(cf.frames[:, 2], curve.grid))
    pf = cfg.plane_field(D.tol)
    relation = normal_relation(darboux_invariants(cfg), pf, D.tol)
    if relation["sigma"] is None or pf.chi2 is None:
        raise IndeterminateDirections("Plane field of I3 along the curve has no frame")
    return kappa_g - (derivative(relation["sigma"], curve.grid) + pf.chi2)


def geodesic_trace(
    D: DistributionField,
    start: Sequence[float],
    direction: Sequence[float],
    length: float,
    n: int,
) -> dict[str, Any]:
    """Trace the curve with zero geodesic curvature from `start` along `direction`.

    The gauge axis is replaced by the current I1 whenever it comes close to
    the normal; I1 is unchanged at that node so the angle stays continuous.
    """
    p0 = np.asarray(start, dtype=float)
    local = _local_frame(D, p0)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    if abs(float(d @ local.frame[2])) > TANGENCY_TOL:
        raise NotTangentToDistribution("Start direction leaves the distribution", omega=float(d @ local.frame[2]))

    gauge = {"axis": D.resolve_axis(p0)}
    axes = [gauge["axis"]]
    regauges = 0

    def rhs(s: float, y: np.ndarray, c: Any) -> np.ndarray:
        loc = _local_frame(D, y[:3], gauge["axis"])
        rc = loc.coefficients
        alpha = y[3]
        tangent = np.cos(alpha) * loc.frame[0] + np.sin(alpha) * loc.frame[1]
        return np.concatenate([tangent, [-(rc.r1 * np.cos(alpha) + rc.r2 * np.sin(alpha))]])

    def regauge(y: np.ndarray) -> np.ndarray:
        nonlocal regauges
        normal = _unit_normal(D.pfaff.value(y[:3]))
        if abs(float(gauge["axis"] @ normal)) > REGAUGE_COS:
            gauge["axis"] = _local_frame(D, y[:3], gauge["axis"]).frame[0]
            regauges += 1
        axes.append(gauge["axis"])
        return y

    alpha0 = float(np.arctan2(d @ local.frame[1], d @ local.frame[0]))
    grid = Grid(start=0.0, stop=length, n=n)
    states = rk4_integrate(rhs, np.concatenate([p0, [alpha0]]), grid, post_step=regauge)

    positions = states[:, :3]
    locals_ = [_local_frame(D, p, a) for p, a in zip(positions, axes, strict=True)]
    frames = np.array([loc.frame for loc in locals_])
    alpha = states[:, 3]
    tangent = np.cos(alpha)[:, None] * frames[:, 0] + np.sin(alpha)[:, None] * frames[:, 1]
    darboux = np.stack([tangent, np.cross(frames[:, 2], tangent), frames[:, 2]], axis=1)

    velocity = derivative(positions, grid)
    acceleration = derivative(velocity, grid)
    kappa_g = rowdot(acceleration, np.cross(frames[:, 2], velocity))
    drift = np.abs(rowdot(velocity, frames[:, 2]))
    along = [direction_quantities(loc.coefficients, np.cos(a), np.sin(a)) for loc, a in zip(locals_, alpha, strict=True)]
    logger.info("Geodesic traced", nodes=n, length=length, regauges=regauges)
    return {
        "curve": FramedCurve(grid=grid, positions=positions, frames=darboux),
        "alpha": alpha,
        "kappa_g": kappa_g,
        "tangency_drift": float(np.max(drift)),
        "kappa_n": np.array([q["kappa_n"] for q in along]),
        "tau_g": np.array([q["tau_g"] for q in along]),
        "regauges": regauges,
    }


def _vector_text(v: Sequence[float]) -> list[str]:
    return [f"({float(x)!r})" for x in v]


def _pfaff_from_text(texts: Sequence[str]) -> PfaffForm:
    X, Y, Z = (ScalarFunction.from_expression(t, VARIABLES) for t in texts)
    return pfaff_from_expressions(X, Y, Z)


def moisil_plane(p0: float, q0: float, r0: float, a: float, b: float, c: float) -> PfaffForm:
    """Nonholonomic plane: normal (p0, q0, r0) x r + (a, b, c)."""
    if a * p0 + b * q0 + c * r0 == 0.0:
        raise NonholonomyViolated("a p0 + b q0 + c r0 vanishes; the planes are integrable")
    P, Q, R = _vector_text((p0, q0, r0))
    A, B, C = _vector_text((a, b, c))
    return _pfaff_from_text(
        [
            f"{Q}*z - {R}*y + {A}",
            f"{R}*x - {P}*z + {B}",
            f"{P}*y - {Q}*x + {C}",
        ],
    )


def moisil_sphere(
    mu: float,
    p0: float,
    q0: float,
    r0: float,
    a: float,
    b: float,
    c: float,
    h: float,
    k: float,
    l: float,  # noqa: E741
    point: Sequence[float] = (0.0, 0.0, 0.0),
) -> PfaffForm:
    """Nonholonomic sphere: normal 2 r <A, r> - A |r|^2 + mu r + (p0, q0, r0) x r + (h, k, l), A = (a, b, c)."""
    P, Q, R = _vector_text((p0, q0, r0))
    A, B, C = _vector_text((a, b, c))
    H, K, L = _vector_text((h, k, l))
    M = f"({float(mu)!r})"
    dot = f"({A}*x + {B}*y + {C}*z)"
    sq = "(x^2 + y^2 + z^2)"
    form = _pfaff_from_text(
        [
            f"2*x*{dot} - {A}*{sq} + {M}*x + {Q}*z - {R}*y + {H}",
            f"2*y*{dot} - {B}*{sq} + {M}*y + {R}*x - {P}*z + {K}",
            f"2*z*{dot} - {C}*{sq} + {M}*z + {P}*y - {Q}*x + {L}",
        ],
    )
    check = is_nonholonomic(DistributionField(pfaff=form), point)
    if not check["nonholonomic"]:
        raise NonholonomyViolated("<w, curl w> vanishes at the probe point", value=check["w_dot_curl"])
    return form


def classify_special(D: DistributionField, points: np.ndarray) -> dict[str, Any]:
    """Nonholonomic plane (psi = 0, Tm != 0) and nonholonomic sphere tests over probe points."""
    rcs = [rotation_coefficients(D, p) for p in points]
    invs = [NhInvariants.from_coefficients(rc) for rc in rcs]
    principal_gap = np.array([abs(rc.p1 - rc.q2) for rc in rcs])
    torsion_gap = np.array([abs(rc.p2 + rc.q1) for rc in rcs])
    plane_gap = np.array([max(abs(rc.p2), abs(rc.q1), abs(rc.p1 - rc.q2)) for rc in rcs])
    tm = np.array([inv.Tm for inv in invs])
    is_plane = bool(np.max(plane_gap) <= SPECIAL_TOL and np.min(np.abs(tm)) >= PLANE_TM_MIN)
    is_sphere = bool(max(np.max(principal_gap), np.max(torsion_gap)) <= SPECIAL_TOL)
    result = {
        "is_nh_plane": is_plane,
        "is_nh_sphere": is_sphere,
        "sphere_Kg_residual": float(max(abs(inv.Kg - inv.H**2 / 4.0) for inv in invs)),
        "sphere_Tt_residual": float(max(abs(inv.Tt - inv.Tm**2 / 4.0) for inv in invs)),
        "plane_Kg": float(max(abs(inv.Kg) for inv in invs)),
        "plane_H": float(max(abs(inv.H) for inv in invs)),
    }
    logger.info("Distribution classified", probes=len(points), plane=is_plane, sphere=is_sphere)
    return result
