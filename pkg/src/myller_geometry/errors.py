"""Exception hierarchy; each class maps to a CLI exit code."""

from typing import Any


class MyllerError(Exception):
    """Base error carrying structured context for logging."""

    exit_code = 2

    def __init__(self, message: str, **context: Any) -> None:
        self.message = message
        self.context = context
        super().__init__(self._render())

    def at(self, pointer: str) -> "MyllerError":
        """Attach the JSON pointer of the spec entry that caused the error."""
        self.context["pointer"] = pointer
        self.args = (self._render(),)
        return self

    def _render(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({details})"


class SpecError(MyllerError):
    """Invalid problem spec or command line."""

    exit_code = 1


class SchemaError(SpecError):
    """Spec fails schema validation; `pointer` is the JSON pointer of the culprit."""

    def __init__(self, message: str, pointer: str = "", **context: Any) -> None:
        self.pointer = pointer
        super().__init__(message, pointer=pointer or "/", **context)


class ExprSyntaxError(SpecError):
    """Malformed expression text."""

    def __init__(
        self,
        message: str,
        offset: int,
        expected: frozenset[str] = frozenset(),
        **context: Any,
    ) -> None:
        self.offset = offset
        self.expected = expected
        super().__init__(
            message,
            offset=offset,
            expected="|".join(sorted(expected)) or "-",
            **context,
        )


class UnknownFunction(SpecError):
    """Call to a function outside the function table."""


class UnknownVariable(SpecError):
    """Identifier not among the declared variables."""


class GeometryError(MyllerError):
    """Degenerate or inadmissible geometric input."""

    exit_code = 2


class DegenerateFrame(GeometryError):
    """Frame vectors are (nearly) linearly dependent or left-handed."""


class OutOfDomain(GeometryError):
    """Evaluation requested outside the sampled range."""


class UnwrapAmbiguity(GeometryError):
    """Adjacent angles differ by exactly pi."""


class EvalDomainError(GeometryError):
    """Expression evaluated outside its mathematical domain."""

    def __init__(self, message: str, span: tuple[int, int] = (0, 0), **context: Any) -> None:
        self.span = span
        super().__init__(message, span=f"{span[0]}..{span[1]}", **context)


class VanishingCurvature(GeometryError):
    """Curvature of a versor or plane field below k_min."""


class NotArclength(GeometryError):
    """Curve parameter is not arclength."""


class NotAConfiguration(GeometryError):
    """The versor field leaves the plane field."""


class VanishingG(GeometryError):
    """Geodesic curvature of the field vanishes where division by it is needed."""


class NotClosed(GeometryError):
    """Closed configuration required."""


class PoleOnImage(GeometryError):
    """No admissible pole for the spherical polar representation."""


class NotTangent(GeometryError):
    """Curve tangent leaves the plane field."""


class DegenerateParametrization(GeometryError):
    """r_u x r_v vanishes."""


class NotCurvatureLineCoords(GeometryError):
    """F or M does not vanish at the requested point."""


class GaugeDegenerate(GeometryError):
    """Reference axis (nearly) normal to the distribution."""


class NotTangentToDistribution(GeometryError):
    """Curve tangent leaves the distribution."""


class IndeterminateDirections(GeometryError):
    """Principal or extremal-torsion directions are not determined."""


class NonholonomyViolated(GeometryError):
    """Pfaff form is integrable where a nonholonomic one is required."""


class OutputError(MyllerError):
    """Input could not be read or output could not be written."""

    exit_code = 3
