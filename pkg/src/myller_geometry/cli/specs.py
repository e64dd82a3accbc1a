"""JSON problem specs: one pydantic model per subcommand kind.

Expressions are parsed when the spec is loaded, so a syntax error or an
undeclared variable is reported against the JSON pointer of the offending
string rather than at evaluation time.
"""

import hashlib
import json
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
import structlog
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from myller_geometry.core.expr import ScalarFunction
from myller_geometry.errors import OutputError, SchemaError, SpecError
from myller_geometry.models import Frame

logger = structlog.get_logger()


def _as_text(value: Any) -> Any:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return repr(float(value))
    return value


Expr = Annotated[str, BeforeValidator(_as_text)]
Vec3Expr = tuple[Expr, Expr, Expr]
Vec3 = tuple[float, float, float]


class Range(BaseModel):
    """Closed parameter interval; accepts a two-element JSON array."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lo: float
    hi: float

    @model_validator(mode="before")
    @classmethod
    def from_pair(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError("range must have two entries")
            return {"lo": value[0], "hi": value[1]}
        return value

    @model_validator(mode="after")
    def nonempty(self) -> "Range":
        if not self.hi > self.lo:
            raise ValueError("range is empty")
        return self

    @property
    def pair(self) -> tuple[float, float]:
        return (self.lo, self.hi)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Options(StrictModel):
    grid: int | None = Field(default=None, ge=5)
    tol: float | None = Field(default=None, gt=0)
    fd_step: float | None = Field(default=None, gt=0)


class InitFrame(StrictModel):
    """Initial point and frame of a reconstruction."""

    origin: Vec3 = (0.0, 0.0, 0.0)
    e1: Vec3 = (1.0, 0.0, 0.0)
    e2: Vec3 = (0.0, 1.0, 0.0)
    e3: Vec3 = (0.0, 0.0, 1.0)

    def frame(self) -> Frame:
        return Frame.from_matrix(np.asarray(self.origin), np.array([self.e1, self.e2, self.e3]))


class BaseSpec(StrictModel):
    kind: str
    description: str | None = None
    options: Options = Options()

    _functions: dict[str, ScalarFunction] = PrivateAttr(default_factory=dict)
    _digest: str = PrivateAttr(default="")

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        """Pointer -> (expression text, declared variables)."""
        return {}

    def compile(self) -> "BaseSpec":
        for pointer, (text, variables) in self.expressions().items():
            try:
                self._functions[pointer] = ScalarFunction.from_expression(text, variables)
            except SpecError as e:
                raise e.at(pointer) from None
        return self

    def fn(self, pointer: str) -> ScalarFunction:
        return self._functions[pointer]

    def fns(self, *pointers: str) -> list[ScalarFunction]:
        return [self._functions[p] for p in pointers]

    def stamp(self, digest: str) -> "BaseSpec":
        self._digest = digest
        return self

    @property
    def digest(self) -> str:
        return self._digest


def _vector(name: str, texts: tuple[str, ...] | None, variables: tuple[str, ...]) -> dict[str, tuple[str, tuple[str, ...]]]:
    if texts is None:
        return {}
    return {f"/{name}/{k}": (text, variables) for k, text in enumerate(texts)}


class CurveSpec(BaseSpec):
    """Curve r(s) on an arclength range, or r(t) to be reparametrized."""

    x: Expr
    y: Expr
    z: Expr
    s: Range | None = None
    t: Range | None = None

    @model_validator(mode="after")
    def one_parameter(self) -> "CurveSpec":
        if (self.s is None) == (self.t is None):
            raise ValueError("exactly one of 's' or 't' must be given")
        return self

    @property
    def variable(self) -> str:
        return "s" if self.s is not None else "t"

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        var = (self.variable,)
        return {"/x": (self.x, var), "/y": (self.y, var), "/z": (self.z, var)}


class VersorSpec(CurveSpec):
    kind: Literal["versor"]
    xi: Vec3Expr

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        return {**super().expressions(), **_vector("xi", self.xi, (self.variable,))}


class PlaneFieldSpec(CurveSpec):
    kind: Literal["plane-field"]
    nu: Vec3Expr
    predicates: list[str] | None = None

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        return {**super().expressions(), **_vector("nu", self.nu, (self.variable,))}


class MyllerSpec(CurveSpec):
    kind: Literal["myller"]
    xi: Vec3Expr
    nu: Vec3Expr

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        var = (self.variable,)
        return {**super().expressions(), **_vector("xi", self.xi, var), **_vector("nu", self.nu, var)}


class KreinSpec(MyllerSpec):
    kind: Literal["krein"]  # type: ignore[assignment]


class TangentMyllerSpec(CurveSpec):
    kind: Literal["tangent-myller"]
    nu: Vec3Expr

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        return {**super().expressions(), **_vector("nu", self.nu, (self.variable,))}


class SurfaceSpec(BaseSpec):
    kind: Literal["surface"]
    x: Expr
    y: Expr
    z: Expr
    u: Range
    v: Range
    probe: int = Field(default=5, ge=1)

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        uv = ("u", "v")
        return {"/x": (self.x, uv), "/y": (self.y, uv), "/z": (self.z, uv)}


DEFAULT_BOX = (Range(lo=-0.5, hi=0.5), Range(lo=-0.5, hi=0.5), Range(lo=-0.5, hi=0.5))
XYZ = ("x", "y", "z")


class DistributionSpec(BaseSpec):
    """Pfaff form X dx + Y dy + Z dz."""

    X: Expr
    Y: Expr
    Z: Expr
    box: tuple[Range, Range, Range] = DEFAULT_BOX
    probe: int = Field(default=3, ge=1)
    axis: Vec3 | None = None

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        return {"/X": (self.X, XYZ), "/Y": (self.Y, XYZ), "/Z": (self.Z, XYZ)}

    @property
    def box_pairs(self) -> list[tuple[float, float]]:
        return [r.pair for r in self.box]


class NonholonomicSpec(DistributionSpec):
    kind: Literal["nonholonomic"]


class ClassifySpec(DistributionSpec):
    kind: Literal["classify"]


class ReconstructSpec(BaseSpec):
    kind: Literal["reconstruct"]
    target: Literal["versor", "myller"]
    profile: dict[str, Expr]
    s: Range
    init: InitFrame = InitFrame()

    @model_validator(mode="after")
    def profile_names(self) -> "ReconstructSpec":
        names = ("K1", "K2", "a1", "a2", "a3") if self.target == "versor" else ("c1", "c2", "c3", "G", "K", "T")
        missing = [name for name in names if name not in self.profile]
        if missing:
            raise SchemaError(f"Profile misses {missing[0]!r}", pointer=f"/profile/{missing[0]}")
        return self

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        return {f"/profile/{name}": (text, ("s",)) for name, text in self.profile.items()}


class SurfaceCurveEntry(StrictModel):
    """Curve u(t), v(t) on a surface."""

    u: Expr
    v: Expr


class TransportSpec(BaseSpec):
    """Parallel transport; which keys are needed depends on `mode`."""

    kind: Literal["transport"]
    mode: Literal["myller", "surface", "nonholonomic"]
    V0: tuple[float, float]
    x: Expr | None = None
    y: Expr | None = None
    z: Expr | None = None
    s: Range | None = None
    t: Range | None = None
    xi: Vec3Expr | None = None
    nu: Vec3Expr | None = None
    u: Range | None = None
    v: Range | None = None
    curve: SurfaceCurveEntry | None = None
    X: Expr | None = None
    Y: Expr | None = None
    Z: Expr | None = None
    axis: Vec3 | None = None

    @model_validator(mode="after")
    def mode_keys(self) -> "TransportSpec":
        needed = {
            "myller": ("x", "y", "z", "xi", "nu"),
            "surface": ("x", "y", "z", "u", "v", "curve", "t"),
            "nonholonomic": ("x", "y", "z", "X", "Y", "Z"),
        }[self.mode]
        for key in needed:
            if getattr(self, key) is None:
                raise SchemaError(f"Transport mode {self.mode!r} needs {key!r}", pointer=f"/{key}")
        if self.mode != "surface" and (self.s is None) == (self.t is None):
            raise SchemaError("Exactly one of 's' or 't' must be given", pointer="/s")
        return self

    @property
    def variable(self) -> str:
        return "s" if self.s is not None else "t"

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        assert self.x is not None and self.y is not None and self.z is not None
        if self.mode == "surface":
            assert self.curve is not None
            uv, t = ("u", "v"), ("t",)
            return {
                "/x": (self.x, uv),
                "/y": (self.y, uv),
                "/z": (self.z, uv),
                "/curve/u": (self.curve.u, t),
                "/curve/v": (self.curve.v, t),
            }
        var = (self.variable,)
        result = {"/x": (self.x, var), "/y": (self.y, var), "/z": (self.z, var)}
        if self.mode == "myller":
            result.update(_vector("xi", self.xi, var))
            result.update(_vector("nu", self.nu, var))
        else:
            assert self.X is not None and self.Y is not None and self.Z is not None
            result.update({"/X": (self.X, XYZ), "/Y": (self.Y, XYZ), "/Z": (self.Z, XYZ)})
        return result


class GeodesicSpec(DistributionSpec):
    kind: Literal["geodesic"]
    start: Vec3
    direction: Vec3
    length: float = Field(gt=0)


class IndicatrixSpec(BaseSpec):
    kind: Literal["indicatrix"]
    source: Literal["surface", "nonholonomic"]
    point: tuple[float, ...]
    indicatrix: Literal["dupin", "bonnet", "normal_line", "torsion_line"]
    theta: float | None = None
    samples: int = Field(default=360, ge=1)
    x: Expr | None = None
    y: Expr | None = None
    z: Expr | None = None
    u: Range | None = None
    v: Range | None = None
    X: Expr | None = None
    Y: Expr | None = None
    Z: Expr | None = None
    axis: Vec3 | None = None

    @model_validator(mode="after")
    def source_keys(self) -> "IndicatrixSpec":
        surface = self.source == "surface"
        needed = ("x", "y", "z", "u", "v") if surface else ("X", "Y", "Z")
        for key in needed:
            if getattr(self, key) is None:
                raise SchemaError(f"Indicatrix source {self.source!r} needs {key!r}", pointer=f"/{key}")
        if len(self.point) != (2 if surface else 3):
            raise SchemaError("Point has the wrong number of coordinates", pointer="/point")
        if not surface and self.indicatrix not in ("dupin", "bonnet"):
            raise SchemaError("Distributions only have dupin and bonnet indicatrices", pointer="/indicatrix")
        if self.indicatrix in ("normal_line", "torsion_line") and self.theta is None:
            raise SchemaError("Line indicatrices need a fixed direction", pointer="/theta")
        return self

    def expressions(self) -> dict[str, tuple[str, tuple[str, ...]]]:
        if self.source == "surface":
            assert self.x is not None and self.y is not None and self.z is not None
            uv = ("u", "v")
            return {"/x": (self.x, uv), "/y": (self.y, uv), "/z": (self.z, uv)}
        assert self.X is not None and self.Y is not None and self.Z is not None
        return {"/X": (self.X, XYZ), "/Y": (self.Y, XYZ), "/Z": (self.Z, XYZ)}


SPEC_MODELS: dict[str, type[BaseSpec]] = {
    "versor": VersorSpec,
    "plane-field": PlaneFieldSpec,
    "myller": MyllerSpec,
    "tangent-myller": TangentMyllerSpec,
    "surface": SurfaceSpec,
    "nonholonomic": NonholonomicSpec,
    "reconstruct": ReconstructSpec,
    "transport": TransportSpec,
    "krein": KreinSpec,
    "geodesic": GeodesicSpec,
    "indicatrix": IndicatrixSpec,
    "classify": ClassifySpec,
}


def _pointer(loc: tuple[int | str, ...]) -> str:
    return "/" + "/".join(str(part) for part in loc)


def spec_digest(raw: Any) -> str:
    """SHA-256 of the canonical JSON form of a spec."""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_spec(raw: Any) -> BaseSpec:
    """Validate a decoded spec and parse its expressions."""
    if not isinstance(raw, dict):
        raise SchemaError("Spec must be a JSON object", pointer="/")
    kind = raw.get("kind")
    if kind not in SPEC_MODELS:
        raise SchemaError(f"Unknown kind {kind!r}", pointer="/kind")

    try:
        spec = SPEC_MODELS[kind].model_validate(raw)
    except ValidationError as e:
        error = e.errors()[0]
        raise SchemaError(error["msg"], pointer=_pointer(error["loc"])) from None
    return spec.compile().stamp(spec_digest(raw))


def load_spec(path: str | Path) -> BaseSpec:
    """Read, validate and compile a JSON problem spec."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise OutputError("Cannot read spec", path=str(path), reason=str(e)) from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("Spec is not valid JSON", pointer="/", line=e.lineno, column=e.colno) from None

    spec = parse_spec(raw)
    logger.info("Spec loaded", path=str(path), kind=spec.kind)
    return spec
