"""Forward-mode dual numbers with nestable, numpy-vectorized parts.

A `Dual` holds `real + eps·ε` with ε² = 0.  Both parts may be floats, numpy
arrays or further `Dual` instances, so nesting gives higher and mixed
derivatives: seeding u as Dual(Dual(u, 0), Dual(1, 0)) and v as
Dual(Dual(v, 1), Dual(0, 0)) makes f(u, v) come out as
Dual(Dual(f, f_v), Dual(f_u, f_uv)).
"""

from collections.abc import Callable
from typing import Any

import numpy as np

Number = Any  # float | np.ndarray | Dual


class Dual:
    """Dual number a + b·eps."""

    __slots__ = ("real", "eps")
    # ndarray operators defer to our reflected methods
    __array_ufunc__ = None

    def __init__(self, real: Number, eps: Number = 0.0) -> None:
        self.real = real
        self.eps = eps

    def __repr__(self) -> str:
        return f"Dual({self.real!r}, {self.eps!r})"

    def __add__(self, other: Number) -> "Dual":
        if isinstance(other, Dual):
            return Dual(self.real + other.real, self.eps + other.eps)
        return Dual(self.real + other, self.eps)

    __radd__ = __add__

    def __sub__(self, other: Number) -> "Dual":
        if isinstance(other, Dual):
            return Dual(self.real - other.real, self.eps - other.eps)
        return Dual(self.real - other, self.eps)

    def __rsub__(self, other: Number) -> "Dual":
        return Dual(other - self.real, -self.eps)

    def __neg__(self) -> "Dual":
        return Dual(-self.real, -self.eps)

    def __mul__(self, other: Number) -> "Dual":
        if isinstance(other, Dual):
            return Dual(
                self.real * other.real,
                self.eps * other.real + self.real * other.eps,
            )
        return Dual(self.real * other, self.eps * other)

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> "Dual":
        if isinstance(other, Dual):
            return Dual(
                self.real / other.real,
                (self.eps * other.real - self.real * other.eps)
                / (other.real * other.real),
            )
        return Dual(self.real / other, self.eps / other)

    def __rtruediv__(self, other: Number) -> "Dual":
        return Dual(
            other / self.real,
            -other * self.eps / (self.real * self.real),
        )

    def __pow__(self, exponent: Number) -> "Dual":
        return power(self, exponent)

    def __rpow__(self, base: Number) -> "Dual":
        return power(base, self)


def base_value(x: Number) -> Any:
    """Innermost real part of a (possibly nested) dual."""
    while isinstance(x, Dual):
        x = x.real
    return x


def all_parts(x: Number) -> list[Any]:
    """Every leaf component of a nested dual."""
    if isinstance(x, Dual):
        return all_parts(x.real) + all_parts(x.eps)
    return [x]


def lift(value: Number, depth: int) -> Number:
    """Embed a constant into `depth` levels of dual numbers."""
    for _ in range(depth):
        value = Dual(value, 0.0)
    return value


def seed(value: Number, depth: int) -> Number:
    """Variable seeded for derivatives up to order `depth` in itself."""
    if depth == 0:
        return value
    return Dual(seed(value, depth - 1), lift(1.0, depth - 1))


def derivative_part(result: Number, order: int, depth: int) -> Any:
    """Extract the `order`-th derivative from a result of `seed(x, depth)`."""
    for _ in range(order):
        result = result.eps if isinstance(result, Dual) else 0.0 * base_value(result)
    for _ in range(depth - order):
        result = result.real if isinstance(result, Dual) else result
    return result


def _unary(
    primal: Callable[[Any], Any],
    slope: Callable[[Number], Number],
) -> Callable[[Number], Number]:
    def apply(x: Number) -> Number:
        if isinstance(x, Dual):
            return Dual(apply(x.real), slope(x.real) * x.eps)
        return primal(x)

    return apply


sin = _unary(np.sin, lambda x: cos(x))
cos = _unary(np.cos, lambda x: -sin(x))
tan = _unary(np.tan, lambda x: 1.0 + tan(x) * tan(x))
asin = _unary(np.arcsin, lambda x: 1.0 / sqrt(1.0 - x * x))
acos = _unary(np.arccos, lambda x: -1.0 / sqrt(1.0 - x * x))
atan = _unary(np.arctan, lambda x: 1.0 / (1.0 + x * x))
sqrt = _unary(np.sqrt, lambda x: 0.5 / sqrt(x))
exp = _unary(np.exp, lambda x: exp(x))
log = _unary(np.log, lambda x: 1.0 / x)
sinh = _unary(np.sinh, lambda x: cosh(x))
cosh = _unary(np.cosh, lambda x: sinh(x))
tanh = _unary(np.tanh, lambda x: 1.0 - tanh(x) * tanh(x))
abs_ = _unary(np.abs, lambda x: np.sign(base_value(x)))


def power(base: Number, exponent: Number) -> Number:
    """base ** exponent with the power rule for constant exponents."""
    if isinstance(exponent, Dual):
        return exp(exponent * log(base))
    if isinstance(base, Dual):
        if np.all(exponent == 0):
            return Dual(power(base.real, exponent), 0.0 * base.eps)
        return Dual(
            power(base.real, exponent),
            exponent * power(base.real, exponent - 1) * base.eps,
        )
    return np.power(base, exponent)


FUNCTIONS: dict[str, Callable[[Number], Number]] = {
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "asin": asin,
    "acos": acos,
    "atan": atan,
    "sqrt": sqrt,
    "exp": exp,
    "log": log,
    "sinh": sinh,
    "cosh": cosh,
    "tanh": tanh,
    "abs": abs_,
}
