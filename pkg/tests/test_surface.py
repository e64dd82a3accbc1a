import numpy as np
import pytest
from conftest import TWO_PI, funcs

from myller_geometry.core.surface import (
    SurfaceCurve,
    SurfacePatch,
    TangentField,
    christoffel,
    christoffel_array,
    curve_invariants_on_surface,
    direction_pair,
    expanded_g_crosscheck,
    field_invariants,
    fundamental_forms,
    gauss_weingarten_residual,
    geodesic_torsion,
    identity_residuals,
    indicatrix,
    levi_civita_transport,
    local_forms,
    metric_christoffel_array,
    principal_data,
    reparametrized_field_check,
    surface_jets,
    tchebishev_test,
    transport_summary,
)
from myller_geometry.errors import DegenerateParametrization, NotCurvatureLineCoords, OutOfDomain, SchemaError

U0 = np.pi / 3


@pytest.fixture
def lattice() -> tuple[np.ndarray, np.ndarray]:
    u, v = np.meshgrid(np.linspace(0.3, 5.9, 7), np.linspace(0.2, 6.0, 7))
    return u.ravel(), v.ravel()


@pytest.fixture
def latitude_curve(sphere) -> SurfaceCurve:
    u, v = funcs([repr(U0), "t"])
    return SurfaceCurve.build(sphere, u, v, (0.0, TWO_PI), 1025)


def test_torus_forms(torus) -> None:
    forms = fundamental_forms(torus, 0.0, 1.0)
    assert forms.E == pytest.approx(0.25)
    assert forms.F == pytest.approx(0.0, abs=1e-15)
    assert forms.G1 == pytest.approx(6.25)
    assert forms.M == pytest.approx(0.0, abs=1e-15)
    # outer equator: both principal curvatures point inwards
    assert forms.Kt == pytest.approx(1.0 / (0.5 * 2.5), rel=1e-12)


def test_gauss_weingarten_on_torus(torus, lattice) -> None:
    u, v = lattice
    assert gauss_weingarten_residual(torus, u, v) <= 1e-7


def test_christoffel_formulas_agree(torus, helicoid, lattice) -> None:
    u, v = lattice
    for S, points in ((torus, (u, v)), (helicoid, (u / 3.0 - 1.0, v))):
        j = surface_jets(S, *points)
        lf = local_forms(j)
        np.testing.assert_allclose(christoffel_array(j, lf), metric_christoffel_array(j, lf), atol=1e-10)


def test_cylinder_christoffel_symbols_vanish(cylinder) -> None:
    assert all(abs(value) <= 1e-14 for value in christoffel(cylinder, 1.0, 0.3).values())


def test_callable_patch_matches_expressions(sphere) -> None:
    def fn(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.stack([np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u)], axis=-1)

    numeric = SurfacePatch.from_callable(fn, sphere.u_range, sphere.v_range)
    exact = fundamental_forms(sphere, 1.1, 0.4)
    approx = fundamental_forms(numeric, 1.1, 0.4)
    for name in ("E", "F", "G1", "L", "M", "N", "H", "Kt"):
        assert getattr(approx, name) == pytest.approx(getattr(exact, name), abs=1e-7), name


def test_domain_and_degeneracy(sphere) -> None:
    with pytest.raises(OutOfDomain):
        fundamental_forms(sphere, 3.1, 0.0)
    cone_tip = funcs(["u*cos(v)", "u*sin(v)", "u"], ("u", "v"))
    patch = SurfacePatch.from_expressions(*cone_tip, (0.0, 1.0), (0.0, TWO_PI))
    with pytest.raises(DegenerateParametrization):
        fundamental_forms(patch, 0.0, 1.0)


def test_direction_pairs(torus, helicoid) -> None:
    pair = direction_pair(torus, 0.7, 1.3, (1.0, 0.4), (-0.3, 1.0))
    assert abs(pair["K"] - pair["K_reversed"]) <= 1e-10
    assert abs(pair["t_asym"]) <= 1e-8

    minimal = direction_pair(helicoid, 0.8, 2.0, (1.0, 0.2), (0.5, -1.0))
    assert abs(minimal["T"] - minimal["T_reversed"]) <= 1e-8


def test_tchebishev(cylinder, torus) -> None:
    assert tchebishev_test(cylinder)["is_tchebishev"]
    result = tchebishev_test(torus)
    assert not result["is_tchebishev"]
    assert result["max_dE_dv"] <= 1e-12
    assert result["max_dG1_du"] > 0.1


class TestCurvatureLinePoint:
    def test_principal_data_on_cylinder(self, cylinder) -> None:
        pd = principal_data(cylinder, 1.0, 0.0)
        assert pd.invR1 == pytest.approx(-0.5)
        assert pd.invR2 == pytest.approx(0.0, abs=1e-15)
        assert pd.Hcheck == pytest.approx(0.0, abs=1e-15)
        assert pd.Ktcheck == pytest.approx(0.0, abs=1e-15)
        angles = np.array([-np.pi / 4, np.pi / 4])
        np.testing.assert_allclose(geodesic_torsion(pd, angles), [-0.25, 0.25], atol=1e-15)

    def test_helicoid_coordinates_are_not_curvature_lines(self, helicoid) -> None:
        with pytest.raises(NotCurvatureLineCoords):
            principal_data(helicoid, 0.5, 1.0)

    def test_inner_torus_is_hyperbolic(self, torus) -> None:
        pd = principal_data(torus, np.pi, 1.0)
        assert pd.invR1 * pd.invR2 < 0.0

    def test_dupin_indicatrix(self, cylinder) -> None:
        pd = principal_data(cylinder, 1.0, 0.0)
        out = indicatrix(pd, "dupin", np.arange(8) * np.pi / 4)
        np.testing.assert_allclose(out["skipped"], [np.pi / 2, 3 * np.pi / 2])
        assert np.max(np.abs(out["residual"])) <= 1e-12

    @pytest.mark.parametrize("kind", ["bonnet", "normal_line", "torsion_line"])
    def test_other_indicatrices_lie_on_their_conics(self, torus, kind) -> None:
        pd = principal_data(torus, np.pi, 1.0)
        out = indicatrix(pd, kind, np.linspace(0.0, TWO_PI, 90, endpoint=False), theta=0.4)
        assert len(out["x"]) > 0
        assert np.max(np.abs(out["residual"])) <= 1e-10

    def test_line_indicatrix_needs_theta(self, torus) -> None:
        with pytest.raises(SchemaError):
            indicatrix(principal_data(torus, 0.0, 0.0), "normal_line", np.array([0.0]))

    def test_identity_residuals(self, torus) -> None:
        pd = principal_data(torus, np.pi, 1.0)
        theta, sigma = np.meshgrid(np.linspace(0.0, np.pi, 13), np.linspace(0.0, np.pi, 11))
        out = identity_residuals(pd, theta, sigma)
        assert np.max(np.abs(out["product_identity"])) <= 1e-8
        assert np.max(np.abs(out["beltrami_enneper"])) <= 1e-8
        assert out["enneper"] is not None
        assert np.max(np.abs(out["enneper"])) <= 1e-12

        outer = identity_residuals(principal_data(torus, 0.0, 1.0), theta, sigma)
        assert outer["enneper"] is None


class TestLatitudeOnSphere:
    def test_curve_invariants(self, latitude_curve) -> None:
        ci = curve_invariants_on_surface(latitude_curve)
        np.testing.assert_allclose(np.abs(ci.kappa_g), 1.0 / np.tan(U0), atol=1e-8)
        np.testing.assert_allclose(np.abs(ci.kappa_n), 1.0, atol=1e-8)
        np.testing.assert_allclose(ci.tau_g, 0.0, atol=1e-8)

    def test_levi_civita_holonomy(self, latitude_curve) -> None:
        V = levi_civita_transport(latitude_curve, [1.0, 0.0])
        summary = transport_summary(latitude_curve, V)
        assert summary["norm_drift"] <= 1e-8
        assert abs(summary["holonomy"]) == pytest.approx(np.pi, abs=1e-6)

    def test_coordinate_checks(self, latitude_curve) -> None:
        xi = TangentField.at_angle(latitude_curve, np.full(latitude_curve.curve.grid.n, 0.3))
        assert expanded_g_crosscheck(latitude_curve, xi)["max_difference"] <= 1e-8
        assert reparametrized_field_check(latitude_curve, xi)["max_difference"] <= 1e-8

    def test_field_at_constant_angle_keeps_geodesic_curvature(self, latitude_curve) -> None:
        tangent = field_invariants(latitude_curve, TangentField.tangent(latitude_curve))
        turned = field_invariants(latitude_curve, TangentField.at_angle(latitude_curve, np.full(1025, 0.3)))
        np.testing.assert_allclose(turned.G, tangent.G, atol=1e-7)
        np.testing.assert_allclose(turned.K**2 + turned.T**2, tangent.K**2 + tangent.T**2, atol=1e-7)

    def test_non_unit_field_is_rejected(self, latitude_curve) -> None:
        with pytest.raises(SchemaError):
            TangentField.from_functions(latitude_curve, *funcs(["2", "0"]))
