import numpy as np
import pytest
from conftest import TWO_PI, funcs

from myller_geometry.core.fields import (
    SampledCurve,
    VersorFieldOnCurve,
    frenet_of_versor_field,
    image_length,
    plane_field_invariants,
    plane_field_predicates,
    reconstruct_versor_field,
    ruled_classification,
    space_curve_invariants,
    spherical_image,
    versor_concurrence,
    versor_field_from_framed,
)
from myller_geometry.errors import NotArclength, SchemaError, VanishingCurvature
from myller_geometry.models import Frame, Grid, VectorJet


def versor_field(curve: SampledCurve, texts: list[str]) -> VersorFieldOnCurve:
    return VersorFieldOnCurve(curve=curve, xi=curve.field_jet(funcs(texts, (curve.variable,))))


def axis_curve(n: int = 201) -> SampledCurve:
    return SampledCurve.from_expressions(funcs(["0", "0", "s"], ("s",)), Grid(start=0.0, stop=2.0, n=n))


def test_non_arclength_curve_is_rejected() -> None:
    with pytest.raises(NotArclength):
        SampledCurve.from_expressions(funcs(["2*s", "0", "0"], ("s",)), Grid(start=0.0, stop=1.0, n=11))


def test_reparametrize_circle() -> None:
    curve = SampledCurve.reparametrize(funcs(["2*cos(t)", "2*sin(t)", "0"]), 0.0, TWO_PI, 401)
    assert curve.grid.length == pytest.approx(2 * TWO_PI, rel=1e-12)
    np.testing.assert_allclose(np.linalg.norm(curve.tangent, axis=1), 1.0, atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(curve.jet.d2, axis=1), 0.5, atol=1e-10)
    np.testing.assert_allclose(curve.t, curve.grid.s / 2.0, atol=1e-10)


def test_helicoid_rulings() -> None:
    vf = versor_field(axis_curve(), ["cos(s)", "sin(s)", "0"])
    fd = frenet_of_versor_field(vf)
    np.testing.assert_allclose(fd.K1, 1.0, atol=1e-12)
    np.testing.assert_allclose(fd.K2, 0.0, atol=1e-12)
    np.testing.assert_allclose(fd.a, np.tile([0.0, 0.0, 1.0], (201, 1)), atol=1e-12)
    assert ruled_classification(vf) == {"cylinder": False, "director_plane": True, "developable": False}

    image = spherical_image(fd)
    assert image["great_circle"]
    assert image["sstar"][-1] == pytest.approx(2.0, abs=1e-10)
    assert image_length(fd) == pytest.approx(2.0, abs=1e-7)


def test_cylinder_and_tangent_developable(circle) -> None:
    curve = circle()
    cylinder = versor_field(curve, ["0", "0", "1"])
    assert ruled_classification(cylinder)["cylinder"]
    with pytest.raises(VanishingCurvature):
        frenet_of_versor_field(cylinder)

    tangent = versor_field(curve, ["-sin(s)", "cos(s)", "0"])
    flags = ruled_classification(tangent)
    assert flags["developable"]
    assert not flags["cylinder"]


def test_field_parallel_on_part_of_the_curve() -> None:
    # xi constant on [0, 1], then turning about the axis with angle (s - 1)^4
    curve = axis_curve()
    s = curve.grid.s
    u = np.maximum(s - 1.0, 0.0)
    phi, dphi, ddphi = u**4, 4.0 * u**3, 12.0 * u**2
    turn = np.column_stack([np.cos(phi), np.sin(phi), np.zeros_like(s)])
    side = np.column_stack([-np.sin(phi), np.cos(phi), np.zeros_like(s)])
    jet = VectorJet(
        grid=curve.grid,
        value=turn,
        d1=dphi[:, None] * side,
        d2=ddphi[:, None] * side - (dphi**2)[:, None] * turn,
    )
    vf = VersorFieldOnCurve(curve=curve, xi=jet)
    assert ruled_classification(vf) == {"cylinder": False, "director_plane": True, "developable": False}
    with pytest.raises(VanishingCurvature):
        frenet_of_versor_field(vf)


def test_cone_rulings_are_concurrent(circle) -> None:
    vf = versor_field(circle(), ["cos(s)/sqrt(2)", "sin(s)/sqrt(2)", "-1/sqrt(2)"])
    fd = frenet_of_versor_field(vf)
    np.testing.assert_allclose(fd.K1, 1.0 / np.sqrt(2.0), atol=1e-12)
    result = versor_concurrence(fd)
    assert result["concurrent"]
    assert np.max(np.abs(result["residual_a3"])) <= 1e-12


def test_space_curve_invariants_of_circle(circle) -> None:
    fd = space_curve_invariants(circle())
    np.testing.assert_allclose(fd.K1, 1.0, atol=1e-12)
    np.testing.assert_allclose(fd.K2, 0.0, atol=1e-12)


def test_non_unit_field_is_rejected(circle) -> None:
    with pytest.raises(SchemaError) as info:
        versor_field(circle(), ["2", "0", "0"])
    assert info.value.pointer == "/xi"


def test_versor_reconstruction_round_trip() -> None:
    grid = Grid(start=0.0, stop=TWO_PI, n=2048)
    profile = dict(zip(["K1", "K2", "a1", "a2", "a3"], funcs(["1", "0.5", "1", "0", "0"], ("s",)), strict=True))
    curve, xi = reconstruct_versor_field(profile, Frame.identity(), grid)
    assert curve.max_orthonormality_defect() <= 1e-12
    np.testing.assert_array_equal(xi, curve.frames[:, 0])

    fd = frenet_of_versor_field(versor_field_from_framed(curve))
    rms = np.sqrt(np.mean((fd.K1 - 1.0) ** 2 + (fd.K2 - 0.5) ** 2))
    assert rms <= 1e-6
    np.testing.assert_allclose(fd.a[:, 0], 1.0, atol=1e-6)


def test_reconstruction_rejects_vanishing_k1() -> None:
    grid = Grid(start=0.0, stop=1.0, n=11)
    profile = dict(zip(["K1", "K2", "a1", "a2", "a3"], funcs(["0", "0", "1", "0", "0"], ("s",)), strict=True))
    with pytest.raises(VanishingCurvature):
        reconstruct_versor_field(profile, Frame.identity(), grid)


def test_reconstruction_rejects_non_unit_velocity() -> None:
    grid = Grid(start=0.0, stop=1.0, n=11)
    profile = dict(zip(["K1", "K2", "a1", "a2", "a3"], funcs(["1", "0", "1", "1", "0"], ("s",)), strict=True))
    with pytest.raises(SchemaError):
        reconstruct_versor_field(profile, Frame.identity(), grid)


def test_sphere_normals_along_latitude(latitude) -> None:
    cfg = latitude()
    pf = plane_field_invariants(cfg.curve, cfg.nu)
    assert pf.framed
    np.testing.assert_allclose(pf.chi1, 1.0, atol=1e-10)


def test_parallel_planes_are_not_framed(circle) -> None:
    curve = circle()
    pf = plane_field_invariants(curve, curve.field_jet(funcs(["0", "0", "1"], ("s",)), pointer="/nu"))
    assert not pf.framed
    assert plane_field_predicates(pf) == {"planes_parallel": True}
    with pytest.raises(VanishingCurvature):
        plane_field_predicates(pf, requested=["nu3_concurrent"])
