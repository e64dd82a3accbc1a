import numpy as np
import pytest
from conftest import TWO_PI, funcs

from myller_geometry.core.fields import SampledCurve, frenet_of_versor_field
from myller_geometry.core.myller import (
    MyllerConfig,
    darboux_invariants,
    finite_angle_quotients,
    frame_equation_residual,
    frenet_relation,
    krein_area,
    myller_transport,
    normal_relation,
    parallel_relations,
    reconstruct_configuration,
    rotation_angle,
    second_derivative_residual,
    tangent_curve_invariants,
    tangent_field_relations,
)
from myller_geometry.errors import NotAConfiguration, NotClosed
from myller_geometry.models import Frame, Grid

U0 = np.pi / 3


def principal_normal_config(curve: SampledCurve) -> MyllerConfig:
    """Circle with its tangent as xi and its principal normal as nu."""
    return MyllerConfig.from_functions(
        curve,
        funcs(["-sin(s)", "cos(s)", "0"], ("s",)),
        funcs(["-cos(s)", "-sin(s)", "0"], ("s",)),
    )


class TestLatitude:
    def test_invariants(self, latitude) -> None:
        dd = darboux_invariants(latitude())
        np.testing.assert_allclose(dd.G, 1.0 / np.tan(U0), atol=1e-9)
        np.testing.assert_allclose(dd.K, -1.0, atol=1e-9)
        np.testing.assert_allclose(dd.T, 0.0, atol=1e-9)
        np.testing.assert_allclose(dd.c, np.tile([1.0, 0.0, 0.0], (dd.grid.n, 1)), atol=1e-9)
        assert dd.tangent
        assert parallel_relations(dd) == {"parallel": False, "conjugate": False, "principal": True}

    def test_frame_equations(self, latitude) -> None:
        cfg = latitude()
        dd = darboux_invariants(cfg)
        assert np.max(frame_equation_residual(cfg, dd)) <= 1e-9
        assert np.max(second_derivative_residual(cfg, dd)) <= 1e-7

    def test_finite_angles_tend_to_invariants(self, latitude) -> None:
        dd = darboux_invariants(latitude(n=4097))
        rows = finite_angle_quotients(dd, 2000, [8, 4, 2, 1])
        errors = np.abs(rows[:, 1:] - [dd.G[2000], dd.K[2000], dd.T[2000]])
        assert np.all(errors[-1] <= 1e-2)
        assert np.all(np.diff(errors[:, :2], axis=0) < 0.0)

    def test_frenet_and_normal_relations(self, latitude) -> None:
        cfg = latitude()
        dd = darboux_invariants(cfg)
        fd = frenet_of_versor_field(cfg.versor_field())
        rel = frenet_relation(cfg, dd, fd)
        for key in ("residual_G", "residual_K", "residual_T"):
            assert np.max(np.abs(rel[key])) <= 1e-7, key

        normal = normal_relation(dd, cfg.plane_field())
        assert np.max(np.abs(normal["k2t2_residual"])) <= 1e-7
        np.testing.assert_allclose(normal["sigma"], -np.pi / 2, atol=1e-9)
        for key in ("residual_G", "residual_K", "residual_T"):
            assert np.max(np.abs(normal[key])) <= 1e-7, key
        assert not normal["conjugate"]
        assert normal["abs_T_is_chi1"] is False

    def test_myller_transport_holonomy(self, latitude) -> None:
        dd = darboux_invariants(latitude())
        V = myller_transport(dd, [1.0, 0.0])
        np.testing.assert_allclose(np.linalg.norm(V, axis=1), 1.0, atol=1e-10)
        assert abs(rotation_angle(V[0], V[-1])) == pytest.approx(np.pi, abs=1e-6)

    @pytest.mark.parametrize("u0", [np.pi / 6, np.pi / 3])
    def test_krein_area(self, latitude, u0) -> None:
        cfg = latitude(u0=u0, n=1025)
        dd = darboux_invariants(cfg)
        area = krein_area(cfg, dd, cfg.plane_field())
        cap = TWO_PI * (1.0 - np.cos(u0))
        assert area["omega_direct"] == pytest.approx(cap, abs=1e-5)
        assert area["omega_formula"] == pytest.approx(area["omega_direct"], abs=1e-5)
        assert area["sigma_winding"] == 0
        assert not area["jacobi_flag"]

    def test_tangent_curve_invariants(self, latitude) -> None:
        cfg = latitude()
        out = tangent_curve_invariants(cfg.curve, cfg.nu)
        ci = out["invariants"]
        np.testing.assert_allclose(ci.kappa_g, 1.0 / np.tan(U0), atol=1e-9)
        np.testing.assert_allclose(ci.kappa_n, -1.0, atol=1e-9)
        assert out["classification"] == {"geodesic": False, "asymptotic": False, "curvature_line": True}
        for residual in out["relations"].values():
            assert np.max(np.abs(residual)) <= 1e-7

        rel = tangent_field_relations(darboux_invariants(cfg), ci)
        np.testing.assert_allclose(rel["lambda"], 0.0, atol=1e-9)
        assert np.max(np.abs(rel["residual_K2T2"])) <= 1e-9
        assert rel["bortolotti_angle"] is None


class TestCircleWithPrincipalNormal:
    def test_invariants(self, circle) -> None:
        dd = darboux_invariants(principal_normal_config(circle()))
        np.testing.assert_allclose(dd.G, 0.0, atol=1e-12)
        np.testing.assert_allclose(dd.K, 1.0, atol=1e-12)
        np.testing.assert_allclose(dd.T, 0.0, atol=1e-12)

    def test_krein_area_is_a_hemisphere(self, circle) -> None:
        cfg = principal_normal_config(circle(n=1025))
        dd = darboux_invariants(cfg)
        pf = cfg.plane_field()
        np.testing.assert_allclose(normal_relation(dd, pf)["sigma"], np.pi / 2, atol=1e-9)
        area = krein_area(cfg, dd, pf)
        assert area["omega_direct"] == pytest.approx(TWO_PI, abs=1e-6)
        assert area["omega_formula"] == pytest.approx(TWO_PI, abs=1e-6)
        assert area["jacobi_flag"]


def test_open_arc_is_not_closed() -> None:
    arc = SampledCurve.from_expressions(funcs(["cos(s)", "sin(s)", "0"], ("s",)), Grid(start=0.0, stop=np.pi, n=129))
    cfg = principal_normal_config(arc)
    dd = darboux_invariants(cfg)
    with pytest.raises(NotClosed):
        krein_area(cfg, dd, cfg.plane_field())


def test_versor_field_must_lie_in_the_planes(circle) -> None:
    curve = circle()
    with pytest.raises(NotAConfiguration):
        MyllerConfig.from_functions(curve, funcs(["0", "0", "1"], ("s",)), funcs(["0", "0", "1"], ("s",)))


def test_reconstruction_round_trip() -> None:
    grid = Grid(start=0.0, stop=TWO_PI, n=1025)
    names = ["c1", "c2", "c3", "G", "K", "T"]
    profile = dict(zip(names, funcs(["1", "0", "0", "1", "0.3", "0.2"], ("s",)), strict=True))
    init = Frame(origin=(0.5, 0.0, 0.0), e1=(0, 1, 0), e2=(-1, 0, 0), e3=(0, 0, 1))
    framed = reconstruct_configuration(profile, init, grid)
    np.testing.assert_allclose(framed.positions[0], [0.5, 0.0, 0.0])
    assert framed.max_orthonormality_defect() <= 1e-12

    dd = darboux_invariants(MyllerConfig.from_framed(framed))
    rms = np.sqrt(np.mean((dd.G - 1.0) ** 2 + (dd.K - 0.3) ** 2 + (dd.T - 0.2) ** 2))
    assert rms <= 1e-6
    np.testing.assert_allclose(dd.c[:, 0], 1.0, atol=1e-6)
