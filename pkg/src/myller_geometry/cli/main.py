"""`myller` command: load a JSON problem spec, run it, emit CSV or JSON."""

import argparse
import sys
from collections.abc import Callable, Sequence
from typing import Any, NoReturn

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict

from myller_geometry import __version__
from myller_geometry.cli.output import ResultTable, emit
from myller_geometry.cli.specs import (
    BaseSpec,
    ClassifySpec,
    CurveSpec,
    DistributionSpec,
    GeodesicSpec,
    IndicatrixSpec,
    KreinSpec,
    MyllerSpec,
    NonholonomicSpec,
    PlaneFieldSpec,
    ReconstructSpec,
    SurfaceSpec,
    TangentMyllerSpec,
    TransportSpec,
    VersorSpec,
    load_spec,
)
from myller_geometry.config import Settings, Tolerances, configure_logging, get_settings
from myller_geometry.core.fields import (
    PLANE_PREDICATES,
    SampledCurve,
    VersorFieldOnCurve,
    frenet_of_versor_field,
    image_length,
    plane_field_invariants,
    plane_field_predicates,
    reconstruct_versor_field,
    ruled_classification,
    spherical_image,
    versor_concurrence,
)
from myller_geometry.core.kernel import rownorm
from myller_geometry.core.myller import (
    MyllerConfig,
    darboux_invariants,
    frame_equation_residual,
    krein_area,
    myller_transport,
    parallel_relations,
    reconstruct_configuration,
    rotation_angle,
    tangent_curve_invariants,
)
from myller_geometry.core.nonholonomic import (
    DistributionField,
    classify_special,
    extremal_values,
    geodesic_trace,
    integrability,
    is_nonholonomic,
    nh_indicatrix,
    pfaff_from_expressions,
    probe_lattice,
    rotation_coefficients,
    transport_nh,
)
from myller_geometry.core.surface import (
    SYMBOLS,
    SurfaceCurve,
    SurfacePatch,
    christoffel_array,
    gauss_weingarten_residual,
    indicatrix,
    levi_civita_transport,
    local_forms,
    principal_data,
    surface_jets,
    tchebishev_test,
    transport_summary,
)
from myller_geometry.errors import MyllerError, SchemaError, SpecError
from myller_geometry.models import Grid, NhInvariants

logger = structlog.get_logger()

SUMMARY_KINDS = ("krein", "classify")

Outcome = tuple[pd.DataFrame, dict[str, Any]]


class RunContext(BaseModel):
    """Effective grid size and tolerances of one run."""

    model_config = ConfigDict(frozen=True)

    n: int
    tol: Tolerances


def _max_abs(values: Any) -> float:
    return float(np.max(np.abs(values)))


def _curve(spec: CurveSpec | TransportSpec, ctx: RunContext) -> SampledCurve:
    funcs = spec.fns("/x", "/y", "/z")
    if spec.s is not None:
        return SampledCurve.from_expressions(funcs, Grid(start=spec.s.lo, stop=spec.s.hi, n=ctx.n))
    assert spec.t is not None
    return SampledCurve.reparametrize(funcs, spec.t.lo, spec.t.hi, ctx.n)


def _distribution(spec: DistributionSpec | TransportSpec | IndicatrixSpec, ctx: RunContext) -> DistributionField:
    pfaff = pfaff_from_expressions(*spec.fns("/X", "/Y", "/Z"))
    return DistributionField(pfaff=pfaff, axis=spec.axis, tol=ctx.tol)


def _patch(spec: SurfaceSpec | TransportSpec | IndicatrixSpec) -> SurfacePatch:
    assert spec.u is not None and spec.v is not None
    return SurfacePatch.from_expressions(*spec.fns("/x", "/y", "/z"), spec.u.pair, spec.v.pair)


def _transported(s: np.ndarray, V: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"s": s, "V1": V[:, 0], "V2": V[:, 1]})


def _euclidean_drift(V: np.ndarray) -> dict[str, float]:
    norms = rownorm(V)
    return {
        "norm_drift": _max_abs(norms - norms[0]),
        "holonomy": rotation_angle(V[0], V[-1]),
    }


def run_versor(spec: VersorSpec, ctx: RunContext) -> Outcome:
    curve = _curve(spec, ctx)
    vf = VersorFieldOnCurve(curve=curve, xi=curve.field_jet(spec.fns("/xi/0", "/xi/1", "/xi/2"), pointer="/xi"))
    ruled = ruled_classification(vf, ctx.tol)
    if ruled["cylinder"]:
        return pd.DataFrame({"s": curve.grid.s, "K1": rownorm(vf.xi.d1)}), ruled

    fd = frenet_of_versor_field(vf, ctx.tol)
    summary = {
        **ruled,
        "concurrent": versor_concurrence(fd, ctx.tol)["concurrent"],
        "great_circle": spherical_image(fd, ctx.tol)["great_circle"],
        "image_length": image_length(fd),
    }
    return fd.to_frame(), summary


def run_plane_field(spec: PlaneFieldSpec, ctx: RunContext) -> Outcome:
    unknown = [name for name in spec.predicates or () if name not in PLANE_PREDICATES]
    if unknown:
        raise SchemaError(f"Unknown predicate {unknown[0]!r}", pointer="/predicates")
    curve = _curve(spec, ctx)
    pf = plane_field_invariants(curve, curve.field_jet(spec.fns("/nu/0", "/nu/1", "/nu/2"), pointer="/nu"), ctx.tol)
    predicates = plane_field_predicates(pf, ctx.tol, spec.predicates)
    if spec.predicates:
        predicates = {name: predicates[name] for name in spec.predicates}
    return pf.to_frame(), {"framed": pf.framed, **predicates}


def _configuration(spec: MyllerSpec | TransportSpec, ctx: RunContext) -> MyllerConfig:
    return MyllerConfig.from_functions(
        _curve(spec, ctx),
        spec.fns("/xi/0", "/xi/1", "/xi/2"),
        spec.fns("/nu/0", "/nu/1", "/nu/2"),
    )


def run_myller(spec: MyllerSpec, ctx: RunContext) -> Outcome:
    cfg = _configuration(spec, ctx)
    dd = darboux_invariants(cfg)
    summary = {
        "tangent": cfg.tangent,
        **parallel_relations(dd, ctx.tol),
        "frame_equation_residual": _max_abs(frame_equation_residual(cfg, dd)),
    }
    return dd.to_frame(), summary


def run_tangent_myller(spec: TangentMyllerSpec, ctx: RunContext) -> Outcome:
    curve = _curve(spec, ctx)
    result = tangent_curve_invariants(curve, curve.field_jet(spec.fns("/nu/0", "/nu/1", "/nu/2"), pointer="/nu"), ctx.tol)
    summary: dict[str, Any] = dict(result["classification"])
    for group in ("relations", "plane_relations"):
        if group in result:
            summary[group] = {name: _max_abs(values) for name, values in result[group].items()}
    return result["invariants"].to_frame(), summary


def run_krein(spec: KreinSpec, ctx: RunContext) -> Outcome:
    cfg = _configuration(spec, ctx)
    dd = darboux_invariants(cfg)
    return dd.to_frame(), krein_area(cfg, dd, cfg.plane_field(ctx.tol), ctx.tol)


def run_surface(spec: SurfaceSpec, ctx: RunContext) -> Outcome:
    patch = _patch(spec)
    (u0, u1), (v0, v1) = spec.u.pair, spec.v.pair
    u, v = np.meshgrid(
        np.linspace(u0, u1, spec.probe + 2)[1:-1],
        np.linspace(v0, v1, spec.probe + 2)[1:-1],
        indexing="ij",
    )
    u, v = u.ravel(), v.ravel()
    jets = surface_jets(patch, u, v)
    lf = local_forms(jets)
    gamma = christoffel_array(jets, lf)
    data: dict[str, np.ndarray] = {
        "u": u,
        "v": v,
        "E": lf.E,
        "F": lf.F,
        "G1": lf.G1,
        "L": lf.L,
        "M": lf.M,
        "N": lf.N,
        "H": lf.H,
        "Kt": lf.Kt,
    }
    for name in SYMBOLS:
        i, j, k = int(name[0]) - 1, int(name[2]) - 1, int(name[3]) - 1
        data[f"gamma{name[0]}_{name[2:]}"] = gamma[:, i, j, k]
    summary = {
        "gauss_weingarten_residual": gauss_weingarten_residual(patch, u, v),
        **tchebishev_test(patch, spec.probe),
    }
    return pd.DataFrame(data), summary


def _invariant_rows(D: DistributionField, points: np.ndarray) -> pd.DataFrame:
    rows = []
    for p in points:
        rc = rotation_coefficients(D, p)
        inv = NhInvariants.from_coefficients(rc)
        rows.append({"x": p[0], "y": p[1], "z": p[2], **rc.model_dump(), **inv.model_dump()})
    return pd.DataFrame(rows)


def run_nonholonomic(spec: NonholonomicSpec | ClassifySpec, ctx: RunContext) -> Outcome:
    D = _distribution(spec, ctx)
    points = probe_lattice(spec.box_pairs, spec.probe)
    center = [0.5 * (lo + hi) for lo, hi in spec.box_pairs]
    summary = {
        "integrable": integrability(D, points)["integrable"],
        **is_nonholonomic(D, center),
    }
    return _invariant_rows(D, points), summary


def run_classify(spec: ClassifySpec, ctx: RunContext) -> Outcome:
    frame, summary = run_nonholonomic(spec, ctx)
    D = _distribution(spec, ctx)
    return frame, {**summary, **classify_special(D, probe_lattice(spec.box_pairs, spec.probe))}


def run_reconstruct(spec: ReconstructSpec, ctx: RunContext) -> Outcome:
    grid = Grid(start=spec.s.lo, stop=spec.s.hi, n=ctx.n)
    profile = {name: spec.fn(f"/profile/{name}") for name in spec.profile}
    init = spec.init.frame().check(ctx.tol.ortho)
    if spec.target == "versor":
        curve, _ = reconstruct_versor_field(profile, init, grid, ctx.tol)
    else:
        curve = reconstruct_configuration(profile, init, grid, ctx.tol)
    summary = {
        "endpoint_gap": curve.endpoint_gap(),
        "orthonormality_defect": curve.max_orthonormality_defect(),
    }
    return curve.to_frame(), summary


def run_transport(spec: TransportSpec, ctx: RunContext) -> Outcome:
    if spec.mode == "surface":
        assert spec.t is not None
        sc = SurfaceCurve.build(_patch(spec), spec.fn("/curve/u"), spec.fn("/curve/v"), spec.t.pair, ctx.n)
        V = levi_civita_transport(sc, spec.V0)
        return _transported(sc.curve.grid.s, V), transport_summary(sc, V)
    if spec.mode == "myller":
        dd = darboux_invariants(_configuration(spec, ctx))
        V = myller_transport(dd, spec.V0)
        return _transported(dd.grid.s, V), _euclidean_drift(V)
    curve = _curve(spec, ctx)
    V = transport_nh(_distribution(spec, ctx), curve, spec.V0)
    return _transported(curve.grid.s, V), _euclidean_drift(V)


def run_geodesic(spec: GeodesicSpec, ctx: RunContext) -> Outcome:
    result = geodesic_trace(_distribution(spec, ctx), spec.start, spec.direction, spec.length, ctx.n)
    frame = result["curve"].to_frame()[["s", "x", "y", "z"]]
    for name in ("alpha", "kappa_g", "kappa_n", "tau_g"):
        frame[name] = result[name]
    summary = {
        "tangency_drift": result["tangency_drift"],
        "max_abs_kappa_g": _max_abs(result["kappa_g"]),
        "regauges": result["regauges"],
    }
    return frame, summary


def run_indicatrix(spec: IndicatrixSpec, ctx: RunContext) -> Outcome:
    angles = np.linspace(0.0, 2.0 * np.pi, spec.samples, endpoint=False)
    if spec.source == "surface":
        patch = _patch(spec)
        u, v = spec.point
        patch.check_domain(u, v)
        pd_ = principal_data(patch, u, v)
        points = indicatrix(pd_, spec.indicatrix, angles, spec.theta, ctx.tol)
        extremes: dict[str, Any] = {"invR1": pd_.invR1, "invR2": pd_.invR2}
    else:
        extremes = extremal_values(_distribution(spec, ctx), spec.point)
        points = nh_indicatrix(extremes, spec.indicatrix, angles)
    frame = pd.DataFrame({key: points[key] for key in ("angle", "x", "y", "residual")})
    summary = {
        **extremes,
        "skipped": len(points["skipped"]),
        "max_residual": _max_abs(points["residual"]) if len(points["residual"]) else 0.0,
    }
    return frame, summary


RUNNERS: dict[str, Callable[[Any, RunContext], Outcome]] = {
    "versor": run_versor,
    "plane-field": run_plane_field,
    "myller": run_myller,
    "tangent-myller": run_tangent_myller,
    "surface": run_surface,
    "nonholonomic": run_nonholonomic,
    "reconstruct": run_reconstruct,
    "transport": run_transport,
    "krein": run_krein,
    "geodesic": run_geodesic,
    "indicatrix": run_indicatrix,
    "classify": run_classify,
}


class CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors map to the spec-error exit code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise SpecError(message, prog=self.prog)


def build_parser() -> CliParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True, help="JSON problem spec")
    common.add_argument("--output", default=None, help="output file (default: standard output)")
    common.add_argument("--grid", type=int, default=None, help="number of grid nodes")
    common.add_argument(
        "--fd-step",
        type=float,
        default=None,
        help="relative finite-difference step for callable-backed surfaces and Pfaff forms; "
        "expression input is differentiated exactly, so the value is only recorded in meta",
    )
    common.add_argument("--tol", type=float, default=None, help="predicate tolerance")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    parser = CliParser(prog="myller", description="Invariants of Myller configurations, surfaces and distributions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for kind in (*RUNNERS, "invariants"):
        commands.add_parser(kind, parents=[common], help=f"run a {kind} spec" if kind != "invariants" else "run any spec")
    return parser


def _first(*values: Any) -> Any:
    return next(value for value in values if value is not None)


def resolve_context(args: argparse.Namespace, spec: BaseSpec, settings: Settings) -> RunContext:
    """Flags override spec options, which override environment settings."""
    n = _first(args.grid, spec.options.grid, settings.grid_size)
    predicate = _first(args.tol, spec.options.tol, settings.tolerances.predicate)
    fd_step = _first(args.fd_step, spec.options.fd_step, settings.tolerances.fd_step)
    if n < 5:
        raise SchemaError(f"Grid needs at least 5 nodes, got {n}", pointer="/options/grid")
    if predicate <= 0 or fd_step <= 0:
        raise SchemaError("Tolerances must be positive", pointer="/options")
    tol = settings.tolerances.model_copy(update={"predicate": predicate, "fd_step": fd_step})
    return RunContext(n=n, tol=tol)


def execute(args: argparse.Namespace, settings: Settings) -> ResultTable:
    spec = load_spec(args.input)
    if args.command not in ("invariants", spec.kind):
        raise SchemaError(f"Spec kind {spec.kind!r} does not match command {args.command!r}", pointer="/kind")

    ctx = resolve_context(args, spec, settings)
    logger.info("Running", kind=spec.kind, grid=ctx.n)
    frame, summary = RUNNERS[spec.kind](spec, ctx)
    meta = {
        "kind": spec.kind,
        "spec_hash": spec.digest,
        "tool_version": __version__,
        "grid": ctx.n,
        "tolerances": ctx.tol.model_dump(),
    }
    return ResultTable.from_frame(frame, meta=meta, summary=summary)


def run(argv: Sequence[str] | None = None) -> int:
    """Run the command line; returns the process exit code."""
    configure_logging()
    try:
        settings = get_settings()
        configure_logging(settings.log_level, settings.log_json)
        args = build_parser().parse_args(argv)
        table = execute(args, settings)
        kind = table.meta["kind"]
        fmt = args.format or ("json" if kind in SUMMARY_KINDS else "csv")
        emit(table, fmt, args.output)
    except MyllerError as e:
        logger.error("Command failed", error=str(e), exit_code=e.exit_code)
        return e.exit_code
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
