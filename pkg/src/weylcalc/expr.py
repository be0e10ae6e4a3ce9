"""Scalar fields over chart coordinates.

Expressions are parsed from a small arithmetic grammar, differentiated
exactly, and evaluated at points. There is no simplifier beyond local
constant folding, so derivative trees are not canonical, only correct.

Grammar (loosest binding first)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' exponent)?        # right associative
    primary := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of ``exp``, ``ln``, ``sin``, ``cos``. Exponents must fold to a
numeric constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "DomainError",
    "ParseError",
    "ScalarField",
    "Node",
    "Const",
    "Var",
    "parse",
    "differentiate",
    "evaluate",
    "constant",
    "variable",
]

FUNCTIONS = ("exp", "ln", "sin", "cos")


class ParseError(ValueError):
    """Malformed expression text. ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message: str, text: str, offset: int):
        self.text = text
        self.offset = offset
        super().__init__(f"{message} at byte {offset} in {text!r}")


class DomainError(ArithmeticError):
    """Evaluation left the real domain of an operation."""

    def __init__(self, message: str, subexpression: str):
        self.subexpression = subexpression
        super().__init__(f"{message} in subexpression {subexpression}")


# ---------------------------------------------------------------------------
# Expression nodes
# ---------------------------------------------------------------------------


class Node:
    """Base class for immutable expression nodes."""

    __slots__ = ()

    def ev(self, x: Sequence[float]) -> float:
        raise NotImplementedError

    def d(self, i: int) -> Node:
        raise NotImplementedError

    def code(self) -> str:
        raise NotImplementedError

    def text(self) -> str:
        raise NotImplementedError

    def max_var(self) -> int:
        return -1


@dataclass(frozen=True, slots=True)
class Const(Node):
    value: float

    def ev(self, x):
        return self.value

    def d(self, i):
        return ZERO

    def code(self):
        return repr(self.value)

    def text(self):
        v = self.value
        if v < 0 or math.copysign(1.0, v) < 0:
            return f"(-{-v!r})"
        return repr(v)


@dataclass(frozen=True, slots=True)
class Var(Node):
    index: int
    name: str = ""

    def ev(self, x):
        return x[self.index]

    def d(self, i):
        return ONE if i == self.index else ZERO

    def code(self):
        return f"x[{self.index}]"

    def text(self):
        return self.name or f"x{self.index}"

    def max_var(self):
        return self.index


@dataclass(frozen=True, slots=True)
class Neg(Node):
    a: Node

    def ev(self, x):
        return -self.a.ev(x)

    def d(self, i):
        return neg(self.a.d(i))

    def code(self):
        return f"(-{self.a.code()})"

    def text(self):
        return f"(-{self.a.text()})"

    def max_var(self):
        return self.a.max_var()


@dataclass(frozen=True, slots=True)
class Add(Node):
    a: Node
    b: Node

    def ev(self, x):
        return self.a.ev(x) + self.b.ev(x)

    def d(self, i):
        return add(self.a.d(i), self.b.d(i))

    def code(self):
        return f"({self.a.code()}+{self.b.code()})"

    def text(self):
        return f"({self.a.text()} + {self.b.text()})"

    def max_var(self):
        return max(self.a.max_var(), self.b.max_var())


@dataclass(frozen=True, slots=True)
class Sub(Node):
    a: Node
    b: Node

    def ev(self, x):
        return self.a.ev(x) - self.b.ev(x)

    def d(self, i):
        return sub(self.a.d(i), self.b.d(i))

    def code(self):
        return f"({self.a.code()}-{self.b.code()})"

    def text(self):
        return f"({self.a.text()} - {self.b.text()})"

    def max_var(self):
        return max(self.a.max_var(), self.b.max_var())


@dataclass(frozen=True, slots=True)
class Mul(Node):
    a: Node
    b: Node

    def ev(self, x):
        return self.a.ev(x) * self.b.ev(x)

    def d(self, i):
        return add(mul(self.a.d(i), self.b), mul(self.a, self.b.d(i)))

    def code(self):
        return f"({self.a.code()}*{self.b.code()})"

    def text(self):
        return f"({self.a.text()} * {self.b.text()})"

    def max_var(self):
        return max(self.a.max_var(), self.b.max_var())


@dataclass(frozen=True, slots=True)
class Div(Node):
    a: Node
    b: Node

    def ev(self, x):
        den = self.b.ev(x)
        if den == 0.0:
            raise DomainError("division by zero", self.text())
        return self.a.ev(x) / den

    def d(self, i):
        da, db = self.a.d(i), self.b.d(i)
        if db == ZERO:
            return div(da, self.b)
        num = sub(mul(da, self.b), mul(self.a, db))
        return div(num, power(self.b, 2.0))

    def code(self):
        return f"_div({self.a.code()},{self.b.code()},N)"

    def text(self):
        return f"({self.a.text()} / {self.b.text()})"

    def max_var(self):
        return max(self.a.max_var(), self.b.max_var())


@dataclass(frozen=True, slots=True)
class Pow(Node):
    base: Node
    exponent: float

    def ev(self, x):
        return _pow(self.base.ev(x), self.exponent, self)

    def d(self, i):
        db = self.base.d(i)
        if db == ZERO:
            return ZERO
        k = self.exponent
        return mul(mul(Const(k), power(self.base, k - 1.0)), db)

    def code(self):
        return f"_pow({self.base.code()},{self.exponent!r},N)"

    def text(self):
        return f"({self.base.text()} ^ {Const(self.exponent).text()})"

    def max_var(self):
        return self.base.max_var()


@dataclass(frozen=True, slots=True)
class Func(Node):
    name: str
    a: Node

    def ev(self, x):
        v = self.a.ev(x)
        if self.name == "exp":
            return _exp(v, self)
        if self.name == "ln":
            return _ln(v, self)
        if self.name == "sin":
            return math.sin(v)
        return math.cos(v)

    def d(self, i):
        da = self.a.d(i)
        if da == ZERO:
            return ZERO
        if self.name == "exp":
            outer: Node = self
        elif self.name == "ln":
            return div(da, self.a)
        elif self.name == "sin":
            outer = Func("cos", self.a)
        else:
            outer = neg(Func("sin", self.a))
        return mul(outer, da)

    def code(self):
        if self.name in ("sin", "cos"):
            return f"_{self.name}({self.a.code()})"
        return f"_{self.name}({self.a.code()},N)"

    def text(self):
        return f"{self.name}({self.a.text()})"

    def max_var(self):
        return self.a.max_var()


ZERO = Const(0.0)
ONE = Const(1.0)


def _where(node) -> str:
    # Compiled evaluators pass no node; the caller re-walks the tree to name it.
    return node.text() if node is not None else "<compiled>"


def _pow(base: float, k: float, node) -> float:
    if k == int(k) and abs(k) < 2**31:
        ik = int(k)
        if ik < 0 and base == 0.0:
            raise DomainError("division by zero", _where(node))
        try:
            return base**ik
        except OverflowError:
            raise DomainError("overflow", _where(node)) from None
    if base <= 0.0:
        raise DomainError("non-integer power of non-positive base", _where(node))
    return base**k


def _exp(v: float, node) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        raise DomainError("overflow", _where(node)) from None


def _ln(v: float, node) -> float:
    if v <= 0.0:
        raise DomainError("logarithm of non-positive value", _where(node))
    return math.log(v)


def _div(a: float, b: float, node) -> float:
    if b == 0.0:
        raise DomainError("division by zero", _where(node))
    return a / b


# ---------------------------------------------------------------------------
# Folding constructors
# ---------------------------------------------------------------------------


def _is(node: Node, value: float) -> bool:
    return isinstance(node, Const) and node.value == value


def neg(a: Node) -> Node:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def add(a: Node, b: Node) -> Node:
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Sub(a, b)


def mul(a: Node, b: Node) -> Node:
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def div(a: Node, b: Node) -> Node:
    if _is(b, 1.0):
        return a
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    return Div(a, b)


def power(base: Node, k: float) -> Node:
    if k == 1.0:
        return base
    if k == 0.0:
        return ONE
    if isinstance(base, Const):
        try:
            return Const(_pow(base.value, k, Pow(base, k)))
        except DomainError:
            pass
    return Pow(base, float(k))


def func(name: str, a: Node) -> Node:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    return Func(name, a)


# ---------------------------------------------------------------------------
# Public field type
# ---------------------------------------------------------------------------

_NAMESPACE = {
    "_div": _div,
    "_pow": _pow,
    "_exp": _exp,
    "_ln": _ln,
    "_sin": math.sin,
    "_cos": math.cos,
}


class ScalarField:
    """Immutable symbolic function of ``nvars`` chart coordinates."""

    __slots__ = ("root", "nvars", "names", "_fn")

    def __init__(self, root: Node, nvars: int, names: Sequence[str] | None = None):
        if nvars < 1:
            raise ValueError("nvars must be positive")
        if root.max_var() >= nvars:
            raise ValueError(f"variable index {root.max_var()} out of range for nvars={nvars}")
        self.root = root
        self.nvars = nvars
        self.names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(nvars))
        # The compiled body is a straight-line expression; domain helpers receive
        # a placeholder node and the tree walker re-raises with the real culprit.
        src = f"lambda x, N=None: {root.code()}"
        self._fn = eval(compile(src, "<ScalarField>", "eval"), dict(_NAMESPACE))

    def __call__(self, point: Sequence[float]) -> float:
        return evaluate(self, point)

    def __repr__(self) -> str:
        return f"ScalarField({self.to_string()!r}, nvars={self.nvars})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ScalarField) and self.nvars == other.nvars and self.root == other.root

    def __hash__(self) -> int:
        return hash((self.root, self.nvars))

    @property
    def is_zero(self) -> bool:
        return _is(self.root, 0.0)

    @property
    def is_constant(self) -> bool:
        return isinstance(self.root, Const)

    def to_string(self) -> str:
        """Fully parenthesised text that parses back to an identical evaluator."""
        return self.root.text()

    def diff(self, i: int) -> ScalarField:
        return differentiate(self, i)

    def _wrap(self, root: Node) -> ScalarField:
        return ScalarField(root, self.nvars, self.names)

    def __add__(self, other):
        return self._wrap(add(self.root, _as_node(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(sub(self.root, _as_node(other)))

    def __rsub__(self, other):
        return self._wrap(sub(_as_node(other), self.root))

    def __mul__(self, other):
        return self._wrap(mul(self.root, _as_node(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(div(self.root, _as_node(other)))

    def __rtruediv__(self, other):
        return self._wrap(div(_as_node(other), self.root))

    def __neg__(self):
        return self._wrap(neg(self.root))

    def __pow__(self, k: float):
        return self._wrap(power(self.root, float(k)))

    def apply(self, name: str) -> ScalarField:
        return self._wrap(func(name, self.root))


def _as_node(value) -> Node:
    if isinstance(value, ScalarField):
        return value.root
    if isinstance(value, Node):
        return value
    return Const(float(value))


def constant(value: float, nvars: int, names: Sequence[str] | None = None) -> ScalarField:
    return ScalarField(Const(float(value)), nvars, names)


def variable(index: int, nvars: int, names: Sequence[str] | None = None) -> ScalarField:
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(nvars))
    return ScalarField(Var(index, names[index]), nvars, names)


def differentiate(f: ScalarField, i: int) -> ScalarField:
    """Exact partial derivative of ``f`` with respect to coordinate ``i``."""
    if not 0 <= i < f.nvars:
        raise IndexError(f"coordinate index {i} out of range for nvars={f.nvars}")
    return ScalarField(f.root.d(i), f.nvars, f.names)


def evaluate(f: ScalarField, point: Sequence[float]) -> float:
    """Value of ``f`` at ``point``; raises :class:`DomainError` instead of returning NaN/Inf."""
    if len(point) != f.nvars:
        raise ValueError(f"point has {len(point)} coordinates, field expects {f.nvars}")
    try:
        value = f._fn(point)
    except (DomainError, ArithmeticError, ValueError):
        value = None
    if value is None or not math.isfinite(value):
        # Slow path names the failing subexpression.
        try:
            value = f.root.ev(point)
        except OverflowError:
            raise DomainError("overflow", f.to_string()) from None
        except ValueError as exc:
            raise DomainError(str(exc), f.to_string()) from None
        if not math.isfinite(value):
            raise DomainError("non-finite result", f.to_string())
    return float(value)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True, slots=True)
class _Tok:
    kind: str  # "num", "name", "op", "end"
    value: str
    offset: int  # character offset


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            toks.append(_Tok("end", "", pos))
            return toks
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", text, _byte_offset(text, pos))
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()


def _byte_offset(text: str, char_offset: int) -> int:
    return len(text[:char_offset].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.names = list(names)
        self.toks = _tokenize(text)
        self.i = 0

    def error(self, message: str, tok: _Tok | None = None) -> ParseError:
        tok = tok or self.toks[self.i]
        return ParseError(message, self.text, _byte_offset(self.text, tok.offset))

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self, value: str) -> bool:
        if self.tok.kind == "op" and self.tok.value == value:
            self.i += 1
            return True
        return False

    def expect(self, value: str) -> None:
        if not self.take(value):
            found = self.tok.value or "end of input"
            raise self.error(f"expected {value!r}, found {found!r}")

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected token {self.tok.value!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            if self.take("+"):
                node = add(node, self.term())
            elif self.take("-"):
                node = sub(node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.unary()
        while True:
            if self.take("*"):
                node = mul(node, self.unary())
            elif self.take("/"):
                node = div(node, self.unary())
            else:
                return node

    def unary(self) -> Node:
        if self.take("-"):
            return neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.value == "^":
            self.i += 1
            start = self.tok
            exponent = self.unary()
            if not isinstance(exponent, Const):
                raise self.error("non-constant exponent", start)
            base = power(base, exponent.value)
        return base

    def primary(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.value))
        if tok.kind == "name":
            self.i += 1
            if tok.value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return func(tok.value, arg)
            if tok.value in self.names:
                return Var(self.names.index(tok.value), tok.value)
            raise self.error(f"unknown identifier {tok.value!r}", tok)
        if self.take("("):
            node = self.expr()
            self.expect(")")
            return node
        found = tok.value or "end of input"
        raise self.error(f"unexpected {found!r}", tok)


def parse(text: str, coordinate_names: Sequence[str]) -> ScalarField:
    """Parse ``text`` into a field over ``coordinate_names``.

    >>> parse("x*y + 2", ["x", "y"])([3.0, 4.0])
    14.0
    """
    names = list(coordinate_names)
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate coordinate names in {names}")
    for name in names:
        if name in FUNCTIONS:
            raise ValueError(f"coordinate name {name!r} shadows a function")
    root = _Parser(text, names).parse()
    return ScalarField(root, len(names), names)
