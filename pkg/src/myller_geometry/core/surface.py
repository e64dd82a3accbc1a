"""Parametric surfaces: fundamental forms, Christoffel symbols, tangent-field invariants.

Surface quantities are evaluated on arrays of (u, v) points at once.  An
expression-backed patch gets exact derivatives from nested duals; a
callable-backed patch falls back to Richardson-extrapolated central
differences.
"""

from collections.abc import Callable, Sequence
from typing import Any

import numpy as np
import structlog

from myller_geometry.config import DEFAULT_TOLERANCES, Tolerances
from myller_geometry.core.expr import ScalarFunction
from myller_geometry.core.fields import SampledCurve, stencil_jet
from myller_geometry.core.kernel import rk4_integrate, rowdot, triple
from myller_geometry.core.myller import rotation_angle
from myller_geometry.errors import (
    DegenerateParametrization,
    NotCurvatureLineCoords,
    OutOfDomain,
    SchemaError,
)
from myller_geometry.models import (
    CurveInvariants,
    DarbouxData,
    FormData,
    PrincipalData,
    VectorJet,
)
from myller_geometry.models.geometry import ArrayModel

logger = structlog.get_logger()

DELTA_MIN = 1e-12
CURVATURE_LINE_TOL = 1e-8
FIRST_FORM_UNIT_TOL = 1e-8
TCHEBISHEV_TOL = 1e-8

# G = sqrt(Delta) * xi^i EPS_ij Dxi^j; G^11 = G^22 = 0, G^12 = -G^21
EPS = np.array([[0.0, 1.0], [-1.0, 0.0]])

SYMBOLS = ("1|11", "1|12", "1|22", "2|11", "2|12", "2|22")
INDICATRICES = ("dupin", "bonnet", "normal_line", "torsion_line")

PatchFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


class SurfacePatch(ArrayModel):
    """r(u, v) on the rectangle u_range x v_range."""

    funcs: tuple[ScalarFunction, ScalarFunction, ScalarFunction] | None = None
    fn: PatchFunction | None = None
    u_range: tuple[float, float]
    v_range: tuple[float, float]
    fd_step: float = DEFAULT_TOLERANCES.fd_step

    @classmethod
    def from_expressions(
        cls,
        x: ScalarFunction,
        y: ScalarFunction,
        z: ScalarFunction,
        u_range: tuple[float, float],
        v_range: tuple[float, float],
    ) -> "SurfacePatch":
        return cls(funcs=(x, y, z), u_range=u_range, v_range=v_range)

    @classmethod
    def from_callable(
        cls,
        fn: PatchFunction,
        u_range: tuple[float, float],
        v_range: tuple[float, float],
        fd_step: float = DEFAULT_TOLERANCES.fd_step,
    ) -> "SurfacePatch":
        """Patch given by a vectorized callable returning (..., 3) points."""
        return cls(fn=fn, u_range=u_range, v_range=v_range, fd_step=fd_step)

    def check_domain(self, u: Any, v: Any, margin: float = 0.0) -> None:
        (u0, u1), (v0, v1) = self.u_range, self.v_range
        slack = 1e-12 * max(1.0, abs(u1 - u0), abs(v1 - v0))
        u_arr, v_arr = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
        outside = (
            (u_arr < u0 + margin - slack)
            | (u_arr > u1 - margin + slack)
            | (v_arr < v0 + margin - slack)
            | (v_arr > v1 - margin + slack)
        )
        if np.any(outside):
            raise OutOfDomain(
                "Point outside the surface domain",
                u_range=str(self.u_range),
                v_range=str(self.v_range),
            )


class SurfaceJets(ArrayModel):
    """r and its partial derivatives up to order two at a set of points."""

    r: np.ndarray
    ru: np.ndarray
    rv: np.ndarray
    ruu: np.ndarray
    ruv: np.ndarray
    rvv: np.ndarray

    def sheared(self) -> "SurfaceJets":
        """Jets in the coordinates (u', v') = (u - v, v)."""
        return SurfaceJets(
            r=self.r,
            ru=self.ru,
            rv=self.ru + self.rv,
            ruu=self.ruu,
            ruv=self.ruu + self.ruv,
            rvv=self.ruu + 2.0 * self.ruv + self.rvv,
        )

    def second(self) -> np.ndarray:
        """r_jk as an array (..., 2, 2, 3)."""
        return np.stack(
            [np.stack([self.ruu, self.ruv], axis=-2), np.stack([self.ruv, self.rvv], axis=-2)],
            axis=-3,
        )


class LocalForms(ArrayModel):
    """First and second fundamental forms with the unit normal, per point."""

    E: np.ndarray
    F: np.ndarray
    G1: np.ndarray
    Delta: np.ndarray
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray
    nu: np.ndarray

    @property
    def sqrt_delta(self) -> np.ndarray:
        return np.sqrt(self.Delta)

    @property
    def H(self) -> np.ndarray:
        return (self.E * self.N - 2.0 * self.F * self.M + self.G1 * self.L) / (2.0 * self.Delta)

    @property
    def Kt(self) -> np.ndarray:
        return (self.L * self.N - self.M**2) / self.Delta

    def first(self) -> np.ndarray:
        return np.stack([np.stack([self.E, self.F], -1), np.stack([self.F, self.G1], -1)], -2)

    def second(self) -> np.ndarray:
        return np.stack([np.stack([self.L, self.M], -1), np.stack([self.M, self.N], -1)], -2)

    def inverse_first(self) -> np.ndarray:
        d = self.Delta
        return np.stack(
            [np.stack([self.G1 / d, -self.F / d], -1), np.stack([-self.F / d, self.E / d], -1)],
            -2,
        )


def _expression_jets(funcs: Sequence[ScalarFunction], u: Any, v: Any) -> SurfaceJets:
    bindings = {"u": u, "v": v}
    parts: dict[str, list[Any]] = {key: [] for key in ("r", "ru", "rv", "ruu", "ruv", "rvv")}
    for f in funcs:
        value, fu, fuu = f.eval_dual(bindings, "u", order=2)
        _, fv, fvv = f.eval_dual(bindings, "v", order=2)
        fuv = f.partials(bindings, "u", "v")[3]
        for key, part in zip(parts, (value, fu, fv, fuu, fuv, fvv), strict=True):
            parts[key].append(part)
    return SurfaceJets(**{key: np.stack(vals, axis=-1) for key, vals in parts.items()})


def _richardson(estimate: Callable[[np.ndarray], np.ndarray], h: np.ndarray) -> np.ndarray:
    return (4.0 * estimate(h / 2.0) - estimate(h)) / 3.0


def _difference_jets(fn: PatchFunction, u: Any, v: Any, step: float) -> SurfaceJets:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    scale = np.maximum(1.0, np.hypot(u, v))
    h1 = step * scale
    h2 = np.sqrt(step) * scale
    r = np.asarray(fn(u, v), dtype=float)

    def col(h: np.ndarray) -> np.ndarray:
        return h[..., None]

    def d_u(h: np.ndarray) -> np.ndarray:
        return (fn(u + h, v) - fn(u - h, v)) / (2.0 * col(h))

    def d_v(h: np.ndarray) -> np.ndarray:
        return (fn(u, v + h) - fn(u, v - h)) / (2.0 * col(h))

    def d_uu(h: np.ndarray) -> np.ndarray:
        return (fn(u + h, v) - 2.0 * r + fn(u - h, v)) / col(h) ** 2

    def d_vv(h: np.ndarray) -> np.ndarray:
        return (fn(u, v + h) - 2.0 * r + fn(u, v - h)) / col(h) ** 2

    def d_uv(h: np.ndarray) -> np.ndarray:
        return (
            fn(u + h, v + h) - fn(u + h, v - h) - fn(u - h, v + h) + fn(u - h, v - h)
        ) / (4.0 * col(h) ** 2)

    return SurfaceJets(
        r=r,
        ru=_richardson(d_u, h1),
        rv=_richardson(d_v, h1),
        ruu=_richardson(d_uu, h2),
        ruv=_richardson(d_uv, h2),
        rvv=_richardson(d_vv, h2),
    )


def surface_jets(S: SurfacePatch, u: Any, v: Any) -> SurfaceJets:
    """r, r_u, r_v, r_uu, r_uv, r_vv at the points (u, v)."""
    if S.funcs is not None:
        S.check_domain(u, v)
        return _expression_jets(S.funcs, u, v)
    if S.fn is None:
        raise SchemaError("Surface has neither expressions nor a callable", pointer="/x")
    margin = 2.0 * float(np.sqrt(S.fd_step)) * max(1.0, float(np.max(np.hypot(u, v))))
    S.check_domain(u, v, margin=margin)
    return _difference_jets(S.fn, u, v, S.fd_step)


def local_forms(j: SurfaceJets) -> LocalForms:
    n = np.cross(j.ru, j.rv)
    delta = np.asarray(rowdot(n, n))
    if np.min(delta) <= DELTA_MIN:
        raise DegenerateParametrization(
            "Tangent vectors r_u, r_v are parallel",
            delta=float(np.min(delta)),
        )
    sd = np.sqrt(delta)
    return LocalForms(
        E=np.asarray(rowdot(j.ru, j.ru)),
        F=np.asarray(rowdot(j.ru, j.rv)),
        G1=np.asarray(rowdot(j.rv, j.rv)),
        Delta=delta,
        L=np.asarray(rowdot(n, j.ruu) / sd),
        M=np.asarray(rowdot(n, j.ruv) / sd),
        N=np.asarray(rowdot(n, j.rvv) / sd),
        nu=np.asarray(n / np.asarray(sd)[..., None]),
    )


def fundamental_forms(S: SurfacePatch, u: float, v: float) -> FormData:
    """Coefficients of the first and second forms, mean and total curvature."""
    lf = local_forms(surface_jets(S, u, v))
    return FormData(
        E=float(lf.E),
        F=float(lf.F),
        G1=float(lf.G1),
        Delta=float(lf.Delta),
        L=float(lf.L),
        M=float(lf.M),
        N=float(lf.N),
        H=float(lf.H),
        Kt=float(lf.Kt),
    )


def christoffel_array(j: SurfaceJets, lf: LocalForms) -> np.ndarray:
    """Gamma[..., i, j, k] = {i|jk} from the triple-product formulas."""
    second = j.second()
    nu = lf.nu[..., None, None, :]
    sd = lf.sqrt_delta[..., None, None]
    gamma1 = -triple(nu, j.rv[..., None, None, :], second) / sd
    gamma2 = triple(nu, j.ru[..., None, None, :], second) / sd
    return np.stack([gamma1, gamma2], axis=-3)


def metric_christoffel_array(j: SurfaceJets, lf: LocalForms) -> np.ndarray:
    """{i|jk} from the derivatives of E, F, G1."""
    Eu, Ev = 2.0 * rowdot(j.ru, j.ruu), 2.0 * rowdot(j.ru, j.ruv)
    Fu = rowdot(j.ruu, j.rv) + rowdot(j.ru, j.ruv)
    Fv = rowdot(j.ruv, j.rv) + rowdot(j.ru, j.rvv)
    Gu, Gv = 2.0 * rowdot(j.rv, j.ruv), 2.0 * rowdot(j.rv, j.rvv)
    # first kind [jk, l]
    first_kind = np.stack(
        [
            np.stack([np.stack([Eu / 2, Fu - Ev / 2], -1), np.stack([Ev / 2, Gu / 2], -1)], -2),
            np.stack([np.stack([Ev / 2, Gu / 2], -1), np.stack([Fv - Gu / 2, Gv / 2], -1)], -2),
        ],
        -3,
    )
    return np.einsum("...il,...jkl->...ijk", lf.inverse_first(), first_kind)


def christoffel(S: SurfacePatch, u: float, v: float) -> dict[str, float]:
    """The six Christoffel symbols {i|jk} at a point."""
    j = surface_jets(S, u, v)
    gamma = christoffel_array(j, local_forms(j))
    return {
        name: float(gamma[int(name[0]) - 1, int(name[2]) - 1, int(name[3]) - 1])
        for name in SYMBOLS
    }


def weingarten_derivatives(j: SurfaceJets, lf: LocalForms) -> tuple[np.ndarray, np.ndarray]:
    """d nu / du and d nu / dv from the second derivatives of r."""
    sd = lf.sqrt_delta[..., None]
    n_u = np.cross(j.ruu, j.rv) + np.cross(j.ru, j.ruv)
    n_v = np.cross(j.ruv, j.rv) + np.cross(j.ru, j.rvv)
    nu_u = (n_u - lf.nu * rowdot(lf.nu, n_u)[..., None]) / sd
    nu_v = (n_v - lf.nu * rowdot(lf.nu, n_v)[..., None]) / sd
    return nu_u, nu_v


def gauss_weingarten_residual(S: SurfacePatch, u: Any, v: Any) -> float:
    """Largest defect of the Gauss and Weingarten formulas over the points."""
    j = surface_jets(S, u, v)
    lf = local_forms(j)
    gamma = christoffel_array(j, lf)
    b = lf.second()
    residuals = []
    for a, c, r_ac in ((0, 0, j.ruu), (0, 1, j.ruv), (1, 1, j.rvv)):
        rhs = (
            gamma[..., 0, a, c, None] * j.ru
            + gamma[..., 1, a, c, None] * j.rv
            + b[..., a, c, None] * lf.nu
        )
        residuals.append(np.linalg.norm(r_ac - rhs, axis=-1))

    nu_u, nu_v = weingarten_derivatives(j, lf)
    d = lf.Delta[..., None]
    E, F, G1 = (x[..., None] for x in (lf.E, lf.F, lf.G1))
    L, M, N = (x[..., None] for x in (lf.L, lf.M, lf.N))
    w_u = ((F * M - G1 * L) * j.ru + (F * L - E * M) * j.rv) / d
    w_v = ((F * N - G1 * M) * j.ru + (F * M - E * N) * j.rv) / d
    residuals.append(np.linalg.norm(nu_u - w_u, axis=-1))
    residuals.append(np.linalg.norm(nu_v - w_v, axis=-1))
    return float(max(np.max(r) for r in residuals))


def tchebishev_test(S: SurfacePatch, probe: int = 5) -> dict[str, Any]:
    """dE/dv and dG1/du over an interior lattice; Tchebishev net when both vanish."""
    (u0, u1), (v0, v1) = S.u_range, S.v_range
    u, v = np.meshgrid(np.linspace(u0, u1, probe + 2)[1:-1], np.linspace(v0, v1, probe + 2)[1:-1])
    j = surface_jets(S, u.ravel(), v.ravel())
    e_v = float(np.max(np.abs(2.0 * rowdot(j.ru, j.ruv))))
    g_u = float(np.max(np.abs(2.0 * rowdot(j.rv, j.ruv))))
    return {
        "max_dE_dv": e_v,
        "max_dG1_du": g_u,
        "is_tchebishev": e_v <= TCHEBISHEV_TOL and g_u <= TCHEBISHEV_TOL,
    }


class SurfaceCurve(ArrayModel):
    """Curve u(t), v(t) on a patch, resampled on its arclength grid.

    `uv` holds (u, v) at the nodes with their s-derivatives.
    """

    patch: SurfacePatch
    curve: SampledCurve
    uv: VectorJet
    jets: SurfaceJets
    forms: LocalForms

    @classmethod
    def build(
        cls,
        patch: SurfacePatch,
        u: ScalarFunction,
        v: ScalarFunction,
        t_range: tuple[float, float],
        n: int,
        variable: str = "t",
    ) -> "SurfaceCurve":
        if patch.funcs is None:
            raise SchemaError("Curves need an expression-backed surface", pointer="/x")
        spatial = [f.compose({"u": u, "v": v}, (variable,)) for f in patch.funcs]
        curve = SampledCurve.reparametrize(spatial, t_range[0], t_range[1], n, variable)
        uv = curve.field_jet([u, v], normalize=False, pointer="/curve")
        jets = surface_jets(patch, uv.value[:, 0], uv.value[:, 1])
        forms = local_forms(jets)
        logger.debug("Surface curve sampled", nodes=n, length=curve.grid.length)
        return cls(patch=patch, curve=curve, uv=uv, jets=jets, forms=forms)

    @property
    def direction(self) -> np.ndarray:
        """(du/ds, dv/ds) per node."""
        return self.uv.d1

    def christoffel(self) -> np.ndarray:
        return christoffel_array(self.jets, self.forms)

    def spatial(self, components: np.ndarray) -> np.ndarray:
        return components[:, :1] * self.jets.ru + components[:, 1:] * self.jets.rv


class TangentField(ArrayModel):
    """Components (xi1, xi2) on (r_u, r_v) of a unit tangent field along a surface curve."""

    components: VectorJet

    @classmethod
    def from_functions(
        cls,
        sc: SurfaceCurve,
        xi1: ScalarFunction,
        xi2: ScalarFunction,
    ) -> "TangentField":
        jet = sc.curve.field_jet([xi1, xi2], normalize=False, pointer="/xi")
        norm2 = first_form(sc.forms, jet.value, jet.value)
        bad = np.nonzero(np.abs(norm2 - 1.0) > FIRST_FORM_UNIT_TOL)[0]
        if bad.size:
            raise SchemaError(
                "Tangent field is not unit in the first form",
                pointer="/xi",
                node=int(bad[0]),
                norm2=float(norm2[bad[0]]),
            )
        return cls(components=jet)

    @classmethod
    def tangent(cls, sc: SurfaceCurve) -> "TangentField":
        """The unit tangent (du/ds, dv/ds) of the curve itself."""
        return cls(components=VectorJet(grid=sc.uv.grid, value=sc.uv.d1, d1=sc.uv.d2))

    @classmethod
    def at_angle(cls, sc: SurfaceCurve, angle: np.ndarray) -> "TangentField":
        """Field turned by `angle` from the curve tangent towards nu x alpha."""
        alpha = sc.curve.tangent
        x = np.cos(angle)[:, None] * alpha + np.sin(angle)[:, None] * np.cross(sc.forms.nu, alpha)
        projections = np.column_stack([rowdot(x, sc.jets.ru), rowdot(x, sc.jets.rv)])
        comps = np.einsum("nij,nj->ni", sc.forms.inverse_first(), projections)
        return cls(components=stencil_jet(comps, sc.uv.grid, order=1))


def first_form(lf: LocalForms, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...ij,...j->...", a, lf.first(), b)


def second_form(lf: LocalForms, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...ij,...j->...", a, lf.second(), b)


def torsion_form(lf: LocalForms, delta: np.ndarray, d: np.ndarray) -> np.ndarray:
    """det of rows (E du + F dv, F du + G1 dv) at delta and (L du + M dv, M du + N dv) at d, over sqrt(Delta)."""
    g_delta = np.einsum("...ij,...j->...i", lf.first(), delta)
    b_d = np.einsum("...ij,...j->...i", lf.second(), d)
    return (g_delta[..., 0] * b_d[..., 1] - g_delta[..., 1] * b_d[..., 0]) / lf.sqrt_delta


def _field_invariants(
    jets: SurfaceJets,
    lf: LocalForms,
    direction: np.ndarray,
    xi: np.ndarray,
    dxi: np.ndarray,
    gamma: np.ndarray,
) -> dict[str, np.ndarray]:
    covariant = dxi + np.einsum("nijk,nj,nk->ni", gamma, xi, direction)
    g = lf.sqrt_delta * np.einsum("ni,ij,nj->n", xi, EPS, covariant)
    return {
        "G": g,
        "K": second_form(lf, xi, direction),
        "T": torsion_form(lf, xi, direction),
        "c1": first_form(lf, xi, direction),
        "c2": lf.sqrt_delta * (xi[:, 0] * direction[:, 1] - xi[:, 1] * direction[:, 0]),
    }


def field_invariants(sc: SurfaceCurve, xi: TangentField) -> DarbouxData:
    """G, K, T and c1, c2 of a tangent field along a surface curve."""
    comps = xi.components
    values = _field_invariants(sc.jets, sc.forms, sc.direction, comps.value, comps.d1, sc.christoffel())
    spatial_xi = sc.spatial(comps.value)
    nu = sc.forms.nu
    n = sc.curve.grid.n
    return DarbouxData(
        grid=sc.curve.grid,
        positions=sc.curve.positions,
        frames=np.stack([spatial_xi, np.cross(nu, spatial_xi), nu], axis=1),
        c=np.column_stack([values["c1"], values["c2"], np.zeros(n)]),
        G=values["G"],
        K=values["K"],
        T=values["T"],
        tangent=True,
    )


def polar_normal_curvature(sc: SurfaceCurve, xi: TangentField) -> np.ndarray:
    """K computed as -<xi, d nu/ds> from the Weingarten derivatives."""
    nu_u, nu_v = weingarten_derivatives(sc.jets, sc.forms)
    dnu = sc.direction[:, :1] * nu_u + sc.direction[:, 1:] * nu_v
    return -rowdot(sc.spatial(xi.components.value), dnu)


def _sheared_jet(jet: VectorJet) -> VectorJet:
    def shear(a: np.ndarray | None) -> np.ndarray | None:
        return None if a is None else np.column_stack([a[:, 0] - a[:, 1], a[:, 1]])

    return VectorJet(grid=jet.grid, value=shear(jet.value), d1=shear(jet.d1), d2=shear(jet.d2))


def reparametrized_field_check(sc: SurfaceCurve, xi: TangentField) -> dict[str, Any]:
    """G recomputed in the coordinates (u', v') = (u - v, v)."""
    jets = sc.jets.sheared()
    lf = local_forms(jets)
    uv = _sheared_jet(sc.uv)
    comps = _sheared_jet(xi.components)
    values = _field_invariants(jets, lf, uv.d1, comps.value, comps.d1, christoffel_array(jets, lf))
    original = field_invariants(sc, xi).G
    return {"G": values["G"], "max_difference": float(np.max(np.abs(values["G"] - original)))}


def expanded_g_crosscheck(sc: SurfaceCurve, xi: TangentField) -> dict[str, Any]:
    """G with Christoffel symbols taken from the metric derivatives instead of triple products."""
    comps = xi.components
    gamma = metric_christoffel_array(sc.jets, sc.forms)
    expanded = _field_invariants(sc.jets, sc.forms, sc.direction, comps.value, comps.d1, gamma)["G"]
    covariant = field_invariants(sc, xi).G
    return {"G_expanded": expanded, "max_difference": float(np.max(np.abs(expanded - covariant)))}


def _transport_rhs(s: float, v: np.ndarray, c: np.ndarray) -> np.ndarray:
    return c.reshape(2, 2) @ v


def levi_civita_transport(sc: SurfaceCurve, V0: Sequence[float]) -> np.ndarray:
    """Components (V1, V2) of a Levi-Civita parallel vector along the curve."""
    generator = -np.einsum("nijk,nk->nij", sc.christoffel(), sc.direction)
    return rk4_integrate(_transport_rhs, np.asarray(V0, dtype=float), sc.curve.grid, generator.reshape(-1, 4))


def transport_summary(sc: SurfaceCurve, V: np.ndarray) -> dict[str, float]:
    """First-form norm drift and the holonomy angle between V(end) and V(0)."""
    norms = first_form(sc.forms, V, V)
    metric = sc.forms.first()[0]
    return {
        "norm_drift": float(np.max(np.abs(np.sqrt(norms) - np.sqrt(norms[0])))),
        "holonomy": rotation_angle(V[0], V[-1], metric),
    }


def curve_invariants_on_surface(sc: SurfaceCurve) -> CurveInvariants:
    """kappa_g, kappa_n, tau_g of the curve: the invariants of its own tangent."""
    dd = field_invariants(sc, TangentField.tangent(sc))
    return CurveInvariants(grid=dd.grid, kappa_g=dd.G, kappa_n=dd.K, tau_g=dd.T)


def principal_data(S: SurfacePatch, u: float, v: float) -> PrincipalData:
    """Principal curvatures and torsions at a point of curvature-line coordinates."""
    forms = fundamental_forms(S, u, v)
    if abs(forms.F) > CURVATURE_LINE_TOL or abs(forms.M) > CURVATURE_LINE_TOL:
        raise NotCurvatureLineCoords(
            "Coordinates are not curvature lines here",
            F=forms.F,
            M=forms.M,
        )
    return PrincipalData.from_curvatures(forms.L / forms.E, forms.N / forms.G1, forms.H, forms.Kt)


def normal_curvature(pd: PrincipalData, theta: Any) -> Any:
    return np.cos(theta) ** 2 * pd.invR1 + np.sin(theta) ** 2 * pd.invR2


def geodesic_torsion(pd: PrincipalData, theta: Any) -> Any:
    return 0.5 * (pd.invR2 - pd.invR1) * np.sin(2.0 * theta)


def mayer_bortolotti(pd: PrincipalData, theta: Any, sigma: Any) -> dict[str, Any]:
    """K and T of the direction pair (theta, sigma) measured from the first principal direction."""
    return {
        "Kds": np.cos(sigma) * np.cos(theta) * pd.invR1 + np.sin(sigma) * np.sin(theta) * pd.invR2,
        "Tds": np.cos(sigma) * np.sin(theta) * pd.invR2 - np.sin(sigma) * np.cos(theta) * pd.invR1,
        "euler_kn": normal_curvature(pd, theta),
        "bonnet_tg": geodesic_torsion(pd, theta),
    }


def polar_indicatrix(
    angles: np.ndarray,
    values: np.ndarray,
    exponent: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict[str, np.ndarray]:
    """Points |value|^exponent (cos a, sin a); angles with vanishing value are skipped."""
    keep = np.abs(values) > tol.k_min
    radius = np.abs(values[keep]) ** exponent
    return {
        "angle": angles[keep],
        "x": radius * np.cos(angles[keep]),
        "y": radius * np.sin(angles[keep]),
        "skipped": angles[~keep],
    }


def indicatrix(
    pd: PrincipalData,
    kind: str,
    angles: np.ndarray,
    theta: float | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict[str, np.ndarray]:
    """Dupin, Bonnet and line indicatrices in principal axes, with conic residuals."""
    a, b = pd.invR1, pd.invR2
    if kind == "dupin":
        points = polar_indicatrix(angles, normal_curvature(pd, angles), -0.5, tol)
        level = points["x"] ** 2 * a + points["y"] ** 2 * b
    elif kind == "bonnet":
        points = polar_indicatrix(angles, geodesic_torsion(pd, angles), -0.5, tol)
        level = (b - a) * points["x"] * points["y"]
    elif kind in ("normal_line", "torsion_line"):
        if theta is None:
            raise SchemaError("Line indicatrices need a fixed direction", pointer="/theta")
        pair = mayer_bortolotti(pd, theta, angles)
        if kind == "normal_line":
            points = polar_indicatrix(angles, pair["Kds"], -1.0, tol)
            level = points["x"] * np.cos(theta) * a + points["y"] * np.sin(theta) * b
        else:
            points = polar_indicatrix(angles, pair["Tds"], -1.0, tol)
            level = points["x"] * np.sin(theta) * b - points["y"] * np.cos(theta) * a
    else:
        raise SchemaError(f"Unknown indicatrix {kind!r}", pointer="/indicatrix")
    points["residual"] = np.abs(level) - 1.0
    logger.debug("Indicatrix sampled", kind=kind, points=len(points["x"]), skipped=len(points["skipped"]))
    return points


def asymptotic_directions(pd: PrincipalData) -> np.ndarray:
    """Angles in [0, pi) with vanishing normal curvature (empty on elliptic points)."""
    a, b = pd.invR1, pd.invR2
    if a * b > 0:
        return np.array([])
    if b == 0.0 and a == 0.0:
        return np.array([0.0, np.pi / 2])
    if b == 0.0:
        return np.array([np.pi / 2])
    root = np.arctan(np.sqrt(-a / b))
    return np.unique(np.mod(np.array([root, -root]), np.pi))


def identity_residuals(pd: PrincipalData, theta: Any, sigma: Any) -> dict[str, Any]:
    """Residuals of the product identity for two directions and its diagonal cases."""
    H = 0.5 * (pd.invR1 + pd.invR2)
    Kt = pd.invR1 * pd.invR2
    pair = mayer_bortolotti(pd, theta, sigma)
    kn_t, kn_s = normal_curvature(pd, theta), normal_curvature(pd, sigma)
    tg_t, tg_s = geodesic_torsion(pd, theta), geodesic_torsion(pd, sigma)
    product = kn_t * kn_s + tg_t * tg_s
    expected = 2.0 * H * pair["Kds"] * np.cos(sigma - theta) - Kt * np.cos(2.0 * (sigma - theta))
    asymptotic = asymptotic_directions(pd)
    return {
        "product_identity": product - expected,
        "beltrami_enneper": kn_t**2 + tg_t**2 - 2.0 * H * kn_t + Kt,
        "enneper": geodesic_torsion(pd, asymptotic) ** 2 + Kt if asymptotic.size else None,
    }


def direction_pair(
    S: SurfacePatch,
    u: float,
    v: float,
    delta: Sequence[float],
    d: Sequence[float],
) -> dict[str, float]:
    """K and T of two tangent directions in both orders and the torsion asymmetry."""
    lf = local_forms(surface_jets(S, u, v))
    a = np.asarray(delta, dtype=float)
    b = np.asarray(d, dtype=float)
    a = a / np.sqrt(first_form(lf, a, a))
    b = b / np.sqrt(first_form(lf, b, b))
    t_ab, t_ba = float(torsion_form(lf, a, b)), float(torsion_form(lf, b, a))
    cross = a[0] * b[1] - a[1] * b[0]
    return {
        "K": float(second_form(lf, a, b)),
        "K_reversed": float(second_form(lf, b, a)),
        "T": t_ab,
        "T_reversed": t_ba,
        "t_asym": (t_ab - t_ba) - 2.0 * float(lf.sqrt_delta * lf.H) * cross,
    }
