import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from conftest import SPECS_DIR

from myller_geometry.cli.output import ResultTable, emit, render
from myller_geometry.cli.specs import load_spec, parse_spec, spec_digest
from myller_geometry.errors import ExprSyntaxError, GeometryError, OutputError, SchemaError, UnknownVariable

SHIPPED = sorted(p for p in SPECS_DIR.glob("*.json") if p.name != "problem_spec.schema.json")


def run_cli_module(*args: str) -> subprocess.CompletedProcess:
    cmd = [sys.executable, "-m", "myller_geometry.cli", *args]
    return subprocess.run(cmd, capture_output=True, text=True)


def write_spec(tmp_path: Path, spec: dict, name: str = "spec.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(spec), encoding="utf-8")
    return path


CIRCLE = {
    "kind": "myller",
    "x": "cos(s)",
    "y": "sin(s)",
    "z": "0",
    "s": [0, 6.283185307179586],
    "xi": ["-sin(s)", "cos(s)", "0"],
    "nu": ["0", "0", "1"],
    "options": {"grid": 65},
}


def test_cli_help() -> None:
    cp = run_cli_module("--help")
    assert cp.returncode == 0, cp.stderr
    assert "Myller configurations" in cp.stdout


def test_circle_invariants_csv() -> None:
    cp = run_cli_module("invariants", "--input", str(SPECS_DIR / "circle_tangent.json"))
    assert cp.returncode == 0, cp.stderr
    frame = pd.read_csv(io.StringIO(cp.stdout))
    assert list(frame.columns) == ["s", "c1", "c2", "c3", "G", "K", "T"]
    assert len(frame) == 257
    np.testing.assert_allclose(frame["G"], 1.0, atol=1e-9)
    np.testing.assert_allclose(frame["K"], 0.0, atol=1e-9)
    np.testing.assert_allclose(frame["T"], 0.0, atol=1e-9)
    np.testing.assert_allclose(frame["c1"], 1.0, atol=1e-9)


def test_json_output_carries_summary_and_meta() -> None:
    spec = SPECS_DIR / "circle_tangent.json"
    cp = run_cli_module("myller", "--input", str(spec), "--format", "json", "--grid", "33")
    assert cp.returncode == 0, cp.stderr
    document = json.loads(cp.stdout)
    assert document["tangent"] is True
    assert document["principal"] is True
    assert len(document["rows"]) == 33
    assert document["meta"]["kind"] == "myller"
    assert document["meta"]["grid"] == 33
    assert document["meta"]["spec_hash"] == spec_digest(json.loads(spec.read_text(encoding="utf-8")))


def test_fd_step_is_recorded_without_touching_exact_derivatives() -> None:
    spec = str(SPECS_DIR / "circle_tangent.json")
    default = json.loads(run_cli_module("myller", "--input", spec, "--format", "json").stdout)
    cp = run_cli_module("myller", "--input", spec, "--format", "json", "--fd-step", "1e-3")
    assert cp.returncode == 0, cp.stderr
    stepped = json.loads(cp.stdout)
    assert stepped["meta"]["tolerances"]["fd_step"] == 1e-3
    assert stepped["rows"] == default["rows"]


def test_classify_heisenberg_defaults_to_json() -> None:
    cp = run_cli_module("classify", "--input", str(SPECS_DIR / "heisenberg.json"))
    assert cp.returncode == 0, cp.stderr
    document = json.loads(cp.stdout)
    assert document["is_nh_plane"] is True
    assert document["is_nh_sphere"] is False
    assert document["integrable"] is False


def test_output_file_matches_stdout(tmp_path: Path) -> None:
    spec = str(SPECS_DIR / "circle_tangent.json")
    out = tmp_path / "result.csv"
    cp = run_cli_module("invariants", "--input", spec, "--output", str(out))
    assert cp.returncode == 0, cp.stderr
    assert cp.stdout == ""
    assert out.read_text(encoding="utf-8") == run_cli_module("invariants", "--input", spec).stdout


@pytest.mark.parametrize("spec", SHIPPED, ids=lambda p: p.stem)
def test_shipped_specs_are_deterministic(spec: Path) -> None:
    first = run_cli_module("invariants", "--input", str(spec))
    assert first.returncode == 0, first.stderr
    second = run_cli_module("invariants", "--input", str(spec))
    assert first.stdout == second.stdout
    assert first.stdout


# --- exit codes ---


def test_unknown_subcommand_is_a_usage_error() -> None:
    cp = run_cli_module("frobnicate", "--input", "x.json")
    assert cp.returncode == 1
    assert "usage:" in cp.stderr


def test_missing_key_reports_pointer(tmp_path: Path) -> None:
    spec = {key: value for key, value in CIRCLE.items() if key != "z"}
    cp = run_cli_module("myller", "--input", str(write_spec(tmp_path, spec)))
    assert cp.returncode == 1
    assert "/z" in cp.stderr


def test_syntax_error_exits_1(tmp_path: Path) -> None:
    cp = run_cli_module("myller", "--input", str(write_spec(tmp_path, {**CIRCLE, "x": "cos(s"})))
    assert cp.returncode == 1
    assert "/x" in cp.stderr


def test_kind_mismatch_exits_1() -> None:
    cp = run_cli_module("krein", "--input", str(SPECS_DIR / "heisenberg.json"))
    assert cp.returncode == 1
    assert "/kind" in cp.stderr


def test_non_arclength_curve_exits_2(tmp_path: Path) -> None:
    spec = {**CIRCLE, "x": "2*cos(s)", "y": "2*sin(s)"}
    cp = run_cli_module("myller", "--input", str(write_spec(tmp_path, spec)))
    assert cp.returncode == 2
    assert cp.stdout == ""


def test_unreadable_input_exits_3(tmp_path: Path) -> None:
    cp = run_cli_module("myller", "--input", str(tmp_path / "missing.json"))
    assert cp.returncode == 3


def test_unwritable_output_exits_3(tmp_path: Path) -> None:
    target = tmp_path / "no-such-dir" / "out.csv"
    cp = run_cli_module("myller", "--input", str(SPECS_DIR / "circle_tangent.json"), "--output", str(target))
    assert cp.returncode == 3


# --- in-process ---


def test_parse_spec_pointers() -> None:
    with pytest.raises(SchemaError) as info:
        parse_spec(["not", "an", "object"])
    assert info.value.pointer == "/"

    with pytest.raises(SchemaError) as info:
        parse_spec({**CIRCLE, "kind": "torus"})
    assert info.value.pointer == "/kind"

    with pytest.raises(SchemaError) as info:
        parse_spec({**CIRCLE, "colour": "red"})
    assert info.value.pointer == "/colour"

    with pytest.raises(SchemaError) as info:
        parse_spec({**CIRCLE, "options": {"grid": 3}})
    assert info.value.pointer == "/options/grid"

    with pytest.raises(ExprSyntaxError) as syntax:
        parse_spec({**CIRCLE, "xi": ["-sin(s)", "cos(s)", "1 +"]})
    assert syntax.value.context["pointer"] == "/xi/2"

    with pytest.raises(UnknownVariable) as unknown:
        parse_spec({**CIRCLE, "y": "sin(t)"})
    assert unknown.value.context["pointer"] == "/y"


def test_numbers_are_accepted_as_expressions() -> None:
    spec = parse_spec({**CIRCLE, "z": 0, "nu": [0, 0, 1]})
    assert float(spec.fn("/z").eval({"s": 1.0})) == 0.0
    assert float(spec.fn("/nu/2").eval({"s": 1.0})) == 1.0


def test_digest_ignores_key_order() -> None:
    reordered = dict(reversed(list(CIRCLE.items())))
    assert parse_spec(reordered).digest == parse_spec(CIRCLE).digest


def test_load_spec_errors(tmp_path: Path) -> None:
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_spec(broken)
    with pytest.raises(OutputError):
        load_spec(tmp_path / "absent.json")


def test_csv_round_trip_is_exact() -> None:
    rng = np.random.default_rng(3)
    frame = pd.DataFrame(rng.normal(size=(20, 3)) * 10.0 ** rng.integers(-12, 12, size=(20, 3)), columns=["s", "a", "b"])
    text = render(ResultTable.from_frame(frame), "csv")
    back = pd.read_csv(io.StringIO(text), float_precision="round_trip")
    np.testing.assert_array_equal(back.to_numpy(), frame.to_numpy())


def test_non_finite_results_are_rejected() -> None:
    frame = pd.DataFrame({"s": [0.0, 1.0], "K": [1.0, np.nan]})
    with pytest.raises(GeometryError):
        ResultTable.from_frame(frame)


def test_json_summary_nan_becomes_null(tmp_path: Path) -> None:
    table = ResultTable.from_frame(
        pd.DataFrame({"s": [0.0]}),
        summary={"flag": np.bool_(True), "value": np.float64("nan"), "count": np.int64(3)},
    )
    out = tmp_path / "out.json"
    emit(table, "json", out)
    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["flag"] is True
    assert document["value"] is None
    assert document["count"] == 3
    assert document["rows"] == [[0.0]]
