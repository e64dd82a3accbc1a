"""Expression parsing, evaluation and forward-mode differentiation.

Grammar, loosest binding first::

    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          right-associative
    atom    := number | name | name '(' sum ')' | '(' sum ')'

Parsing is top-down operator precedence: every token carries a left
binding power and prefix (nud) / infix (led) handlers.
"""

import math
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np
import structlog

from myller_geometry.core import dual
from myller_geometry.core.dual import Dual
from myller_geometry.errors import (
    EvalDomainError,
    ExprSyntaxError,
    OutOfDomain,
    UnknownFunction,
    UnknownVariable,
)
from myller_geometry.models import Grid

logger = structlog.get_logger()

CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = frozenset(dual.FUNCTIONS)

ADD_BP = 10
MUL_BP = 20
NEG_BP = 30
POW_BP = 40

OPERAND_START = frozenset({"number", "identifier", "(", "-"})


@dataclass(frozen=True)
class Number:
    value: float
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Variable:
    name: str
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]
    span: tuple[int, int] = field(default=(0, 0), compare=False)


Node = Union[Number, Variable, Unary, Binary, Call]

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<identifier>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")",
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    """Split text into tokens; offsets are byte positions."""
    tokens: list[Token] = []
    position = 0
    while position < len(text):
        match = _TOKEN.match(text, position)
        if match is None or match.end() == position:
            rest = text[position:]
            if not rest.strip():
                break
            bad = position + len(rest) - len(rest.lstrip())
            raise ExprSyntaxError(
                f"Unexpected character {text[bad]!r}",
                offset=_byte_offset(text, bad),
                expected=OPERAND_START,
            )
        kind = match.lastgroup or "op"
        start = match.start(kind)
        tokens.append(Token(kind if kind != "op" else match.group(kind), match.group(kind), start, match.end()))
        position = match.end()
    tokens.append(Token("end", "", len(text), len(text)))
    return tokens


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8")) + 1


class Parser:
    """Top-down operator-precedence parser over a token list."""

    INFIX = {"+": ADD_BP, "-": ADD_BP, "*": MUL_BP, "/": MUL_BP, "^": POW_BP}

    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0

    @property
    def token(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.token
        self.index += 1
        return token

    def fail(self, token: Token, expected: Iterable[str]) -> ExprSyntaxError:
        found = "end of input" if token.kind == "end" else repr(token.text)
        return ExprSyntaxError(
            f"Unexpected {found}",
            offset=_byte_offset(self.text, token.start),
            expected=frozenset(expected),
        )

    def expect(self, kind: str) -> Token:
        if self.token.kind != kind:
            raise self.fail(self.token, {kind})
        return self.advance()

    def parse(self) -> Node:
        if not self.text.strip():
            raise self.fail(self.token, OPERAND_START)
        node = self.expression(0)
        if self.token.kind != "end":
            raise self.fail(self.token, set(self.INFIX) | {"end"})
        return node

    def expression(self, rbp: int) -> Node:
        left = self.nud(self.advance())
        while self.INFIX.get(self.token.kind, 0) > rbp:
            left = self.led(self.advance(), left)
        return left

    def nud(self, token: Token) -> Node:
        if token.kind == "number":
            value = float(token.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(
                    "Number out of range",
                    offset=_byte_offset(self.text, token.start),
                )
            return Number(value, (token.start, token.end))
        if token.kind == "identifier":
            return self.identifier(token)
        if token.kind == "-":
            operand = self.expression(NEG_BP)
            return Unary("-", operand, (token.start, _span(operand)[1]))
        if token.kind == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        raise self.fail(token, OPERAND_START)

    def led(self, token: Token, left: Node) -> Node:
        # ^ binds right-to-left: parse its right side one notch looser
        rbp = POW_BP - 1 if token.kind == "^" else self.INFIX[token.kind]
        right = self.expression(rbp)
        return Binary(token.kind, left, right, (_span(left)[0], _span(right)[1]))

    def identifier(self, token: Token) -> Node:
        name = token.text
        if self.token.kind == "(":
            if name not in FUNCTIONS:
                raise UnknownFunction(
                    f"Unknown function {name!r}",
                    offset=_byte_offset(self.text, token.start),
                )
            self.advance()
            args = [self.expression(0)]
            while self.token.kind == ",":
                self.advance()
                args.append(self.expression(0))
            close = self.expect(")")
            if len(args) != 1:
                raise ExprSyntaxError(
                    f"{name} takes 1 argument, got {len(args)}",
                    offset=_byte_offset(self.text, token.start),
                )
            return Call(name, tuple(args), (token.start, close.end))
        if name in FUNCTIONS:
            raise self.fail(self.token, {"("})
        if name in CONSTANTS:
            return Number(CONSTANTS[name], (token.start, token.end))
        return Variable(name, (token.start, token.end))


def _span(node: Node) -> tuple[int, int]:
    return node.span


def parse(text: str) -> Node:
    """Parse expression text into an immutable AST."""
    return Parser(text).parse()


def to_text(node: Node) -> str:
    """Fully parenthesized text that parses back to an equal AST."""
    if isinstance(node, Number):
        return repr(float(node.value))
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Unary):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    return f"{node.name}({', '.join(to_text(a) for a in node.args)})"


def free_variables(node: Node) -> set[str]:
    """Names of all variables referenced by the AST."""
    if isinstance(node, Variable):
        return {node.name}
    if isinstance(node, Unary):
        return free_variables(node.operand)
    if isinstance(node, Binary):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, Call):
        return set().union(*(free_variables(a) for a in node.args))
    return set()


def substitute(node: Node, replacements: Mapping[str, Node]) -> Node:
    """Replace variables by subtrees."""
    if isinstance(node, Variable):
        return replacements.get(node.name, node)
    if isinstance(node, Unary):
        return Unary(node.op, substitute(node.operand, replacements), node.span)
    if isinstance(node, Binary):
        return Binary(
            node.op,
            substitute(node.left, replacements),
            substitute(node.right, replacements),
            node.span,
        )
    if isinstance(node, Call):
        return Call(node.name, tuple(substitute(a, replacements) for a in node.args), node.span)
    return node


def _is_integer(value: Any) -> bool:
    return not isinstance(value, Dual) and bool(np.all(np.mod(value, 1.0) == 0.0))


def _check_finite(value: Any, node: Node) -> Any:
    if not all(np.all(np.isfinite(part)) for part in dual.all_parts(value)):
        raise EvalDomainError("Non-finite value", span=node.span)
    return value


def evaluate(node: Node, env: Mapping[str, Any]) -> Any:
    """Evaluate an AST over floats, arrays or dual numbers."""
    if isinstance(node, Number):
        return np.float64(node.value)
    if isinstance(node, Variable):
        return env[node.name]
    if isinstance(node, Unary):
        return -evaluate(node.operand, env)
    if isinstance(node, Binary):
        left = evaluate(node.left, env)
        right = evaluate(node.right, env)
        return _check_finite(_binary(node, left, right), node)
    arg = evaluate(node.args[0], env)
    _check_call_domain(node, dual.base_value(arg))
    with np.errstate(all="ignore"):
        result = dual.FUNCTIONS[node.name](arg)
    return _check_finite(result, node)


def _binary(node: Binary, left: Any, right: Any) -> Any:
    with np.errstate(all="ignore"):
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            if np.any(dual.base_value(right) == 0.0):
                raise EvalDomainError("Division by zero", span=node.span)
            return left / right
        base = dual.base_value(left)
        if isinstance(right, Dual) or not _is_integer(right):
            if np.any(base < 0.0) or (isinstance(right, Dual) and np.any(base <= 0.0)):
                raise EvalDomainError("Power of a non-positive base", span=node.span)
        elif np.any(right < 0) and np.any(base == 0.0):
            raise EvalDomainError("Negative power of zero", span=node.span)
        return dual.power(left, right)


def _check_call_domain(node: Call, x: Any) -> None:
    name = node.name
    if name == "log" and np.any(x <= 0.0):
        raise EvalDomainError("log of a non-positive value", span=node.span)
    if name == "sqrt" and np.any(x < 0.0):
        raise EvalDomainError("sqrt of a negative value", span=node.span)
    if name in ("asin", "acos") and np.any(np.abs(x) > 1.0):
        raise EvalDomainError(f"{name} outside [-1, 1]", span=node.span)


class ScalarFunction:
    """Real function of named variables, backed by an AST or by grid samples."""

    def __init__(
        self,
        variables: tuple[str, ...],
        ast: Node | None = None,
        samples: np.ndarray | None = None,
        grid: Grid | None = None,
        text: str | None = None,
    ) -> None:
        self.variables = variables
        self.ast = ast
        self.samples = samples
        self._grid = grid
        self.text = text

    @classmethod
    def from_expression(cls, text: str, variables: Iterable[str]) -> "ScalarFunction":
        """Parse `text` and bind it to the declared variables."""
        declared = tuple(variables)
        ast = parse(text)
        unknown = sorted(free_variables(ast) - set(declared))
        if unknown:
            raise UnknownVariable(
                f"Unknown variable {unknown[0]!r}",
                declared=",".join(declared),
            )
        return cls(declared, ast=ast, text=text)

    @classmethod
    def from_samples(cls, values: np.ndarray, grid: Grid, variable: str = "s") -> "ScalarFunction":
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise ValueError(f"{values.shape[0]} samples for a grid of {grid.n} nodes")
        return cls((variable,), samples=values, grid=grid)

    @classmethod
    def constant(cls, value: float, variables: Iterable[str]) -> "ScalarFunction":
        return cls(tuple(variables), ast=Number(float(value)), text=repr(float(value)))

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None

    @property
    def grid(self) -> Grid:
        if self._grid is None:
            raise ValueError("expression-backed function has no grid")
        return self._grid

    def _env(self, bindings: Mapping[str, Any]) -> dict[str, Any]:
        missing = [v for v in self.variables if v not in bindings]
        if missing:
            raise UnknownVariable(f"Variable {missing[0]!r} is not bound")
        return {
            v: bindings[v] if isinstance(bindings[v], Dual) else np.asarray(bindings[v], dtype=float)
            for v in self.variables
        }

    def _sample_indices(self, value: Any) -> np.ndarray:
        values = np.atleast_1d(np.asarray(value, dtype=float))
        indices = [self.grid.node_index(float(x)) for x in values]
        if any(i is None for i in indices):
            raise OutOfDomain("Sample-backed function evaluated off its grid")
        return np.array(indices, dtype=int)

    def eval(self, bindings: Mapping[str, Any]) -> Any:
        """Value at the bindings (floats or arrays broadcast together)."""
        if self.is_sampled:
            value = bindings[self.variables[0]]
            indices = self._sample_indices(value)
            result = self.samples[indices]  # type: ignore[index]
            return result if np.ndim(value) else float(result[0])
        assert self.ast is not None
        return evaluate(self.ast, self._env(bindings))

    def eval_dual(self, bindings: Mapping[str, Any], seed_var: str, order: int = 1) -> tuple[Any, ...]:
        """Value and derivatives up to `order` with respect to `seed_var`."""
        if self.is_sampled:
            from myller_geometry.core.kernel import derivative

            indices = self._sample_indices(bindings[self.variables[0]])
            jets = [self.samples]
            for _ in range(order):
                jets.append(derivative(jets[-1], self.grid))
            out = tuple(j[indices] for j in jets)  # type: ignore[index]
            if np.ndim(bindings[self.variables[0]]) == 0:
                return tuple(float(x[0]) for x in out)
            return out
        assert self.ast is not None
        env = self._env(bindings)
        shape = _shape(env)
        env[seed_var] = dual.seed(env[seed_var], order)
        result = evaluate(self.ast, env)
        return tuple(
            _broadcast(dual.derivative_part(result, k, order), shape)
            for k in range(order + 1)
        )

    def partials(self, bindings: Mapping[str, Any], a: str, b: str) -> tuple[Any, Any, Any, Any]:
        """(f, f_a, f_b, f_ab) by nesting an a-dual over a b-dual."""
        assert self.ast is not None
        env = self._env(bindings)
        shape = _shape(env)
        env[a] = Dual(Dual(env[a], 0.0), Dual(1.0, 0.0))
        env[b] = Dual(Dual(env[b], 1.0), Dual(0.0, 0.0))
        result = evaluate(self.ast, env)
        parts = (
            dual.derivative_part(result, 0, 2),
            _inner(result, "eps", "real"),
            _inner(result, "real", "eps"),
            dual.derivative_part(result, 2, 2),
        )
        return tuple(_broadcast(p, shape) for p in parts)  # type: ignore[return-value]

    def compose(self, inner: Mapping[str, "ScalarFunction"], variables: Iterable[str]) -> "ScalarFunction":
        """This function with each of its variables replaced by an expression."""
        if self.is_sampled or any(f.is_sampled for f in inner.values()):
            raise ValueError("only expression-backed functions compose")
        assert self.ast is not None
        replacements = {name: f.ast for name, f in inner.items() if f.ast is not None}
        ast = substitute(self.ast, replacements)
        return ScalarFunction(tuple(variables), ast=ast, text=to_text(ast))

    def __repr__(self) -> str:
        if self.is_sampled:
            return f"ScalarFunction(samples={self.grid.n})"
        return f"ScalarFunction({self.text!r}, variables={self.variables})"


def _inner(result: Any, outer: str, inner: str) -> Any:
    if not isinstance(result, Dual):
        return 0.0 * result
    part = getattr(result, outer)
    if not isinstance(part, Dual):
        return 0.0 * part
    return getattr(part, inner)


def _shape(env: Mapping[str, Any]) -> tuple[int, ...]:
    return np.broadcast_shapes(*(np.shape(dual.base_value(v)) for v in env.values()))


def _broadcast(value: Any, shape: tuple[int, ...]) -> Any:
    return np.broadcast_to(np.asarray(value, dtype=float), shape).copy() if shape else float(value)
