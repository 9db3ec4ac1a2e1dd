"""Symbolic scalar fields over the variables ``x``, ``t`` and ``y``.

A :class:`ScalarField` wraps a small expression tree supporting pointwise
evaluation on numpy arrays, exact symbolic differentiation, and a textual
form that round-trips through :meth:`ScalarField.parse`.  The grammar is

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' exponent)?
    base   := number | 'x' | 't' | 'y' | 'pi'
            | fn '(' expr (',' expr)? ')' | '(' expr ')'

with ``fn`` one of ``abs``, ``exp``, ``sqrt``, ``min``, ``max``.  A leading
unary minus is accepted anywhere a base is expected.

Beyond the grammar the tree carries two internal node kinds: ``sign``
(produced when differentiating ``abs``) and a compactly supported bump

    bump_{c,r}(x) = exp(1 - 1/(1 - u^2)),  u = (x - c)/r,  |u| < 1,

together with its first two derivatives.  Bumps are the canonical compactly
supported C^2 test functions used by the weak-form checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import singledispatch

import numpy as np

from .errors import DomainError


class Node:
    """Base class for expression-tree nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str  # 'x', 't' or 'y'


@dataclass(frozen=True)
class BinOp(Node):
    op: str  # '+', '-', '*', '/', '^'
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    fn: str  # 'abs', 'exp', 'sqrt', 'min', 'max', 'sign'
    args: tuple[Node, ...]


@dataclass(frozen=True)
class Bump(Node):
    """order-th x-derivative of the standard bump centred at c with radius r."""

    center: float
    radius: float
    order: int = 0


PI = Const(math.pi)
ZERO = Const(0.0)
ONE = Const(1.0)

_FUNCTIONS_1 = ("abs", "exp", "sqrt", "sign")
_FUNCTIONS_2 = ("min", "max")


# ---------------------------------------------------------------------------
# evaluation


def _bump_eval(node: Bump, x):
    u = (np.asarray(x, dtype=float) - node.center) / node.radius
    a = 1.0 - u * u
    inside = a > 1e-9
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a_safe = np.where(inside, a, 1.0)
        phi = np.exp(1.0 - 1.0 / a_safe)
        if node.order == 0:
            val = phi
        else:
            s1 = -2.0 * u / a_safe**2
            if node.order == 1:
                val = phi * s1 / node.radius
            elif node.order == 2:
                s2 = -2.0 / a_safe**2 - 8.0 * u * u / a_safe**3
                val = phi * (s1 * s1 + s2) / node.radius**2
            else:
                raise DomainError(f"bump derivatives supported up to order 2, got {node.order}")
    return np.where(inside, val, 0.0)


@singledispatch
def _eval(node: Node, env: dict):
    raise TypeError(f"cannot evaluate node {node!r}")


@_eval.register
def _(node: Const, env: dict):
    return node.value


@_eval.register
def _(node: Var, env: dict):
    try:
        return env[node.name]
    except KeyError:
        raise DomainError(f"no value supplied for variable '{node.name}'") from None


@_eval.register
def _(node: BinOp, env: dict):
    lhs = _eval(node.left, env)
    rhs = _eval(node.right, env)
    if node.op == "+":
        return lhs + rhs
    if node.op == "-":
        return lhs - rhs
    if node.op == "*":
        return np.multiply(lhs, rhs)
    if node.op == "/":
        return np.divide(lhs, rhs)
    if node.op == "^":
        with np.errstate(invalid="ignore"):
            return np.power(np.asarray(lhs, dtype=float), rhs)
    raise TypeError(f"unknown operator {node.op!r}")


@_eval.register
def _(node: Call, env: dict):
    vals = [_eval(a, env) for a in node.args]
    if node.fn == "abs":
        return np.abs(vals[0])
    if node.fn == "exp":
        return np.exp(vals[0])
    if node.fn == "sqrt":
        return np.sqrt(vals[0])
    if node.fn == "sign":
        return np.sign(vals[0])
    if node.fn == "min":
        return np.minimum(vals[0], vals[1])
    if node.fn == "max":
        return np.maximum(vals[0], vals[1])
    raise TypeError(f"unknown function {node.fn!r}")


@_eval.register
def _(node: Bump, env: dict):
    x = env.get("x")
    if x is None:
        raise DomainError("bump fields require a value for 'x'")
    return _bump_eval(node, x)


# ---------------------------------------------------------------------------
# simplifying constructors (keep derivative trees small)


def _is_const(node: Node, value: float | None = None) -> bool:
    return isinstance(node, Const) and (value is None or node.value == value)


def _add(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def _div(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return BinOp("/", a, b)


# ---------------------------------------------------------------------------
# differentiation


@singledispatch
def _diff(node: Node, var: str) -> Node:
    raise TypeError(f"cannot differentiate node {node!r}")


@_diff.register
def _(node: Const, var: str) -> Node:
    return ZERO


@_diff.register
def _(node: Var, var: str) -> Node:
    return ONE if node.name == var else ZERO


@_diff.register
def _(node: BinOp, var: str) -> Node:
    if node.op == "+":
        return _add(_diff(node.left, var), _diff(node.right, var))
    if node.op == "-":
        return _sub(_diff(node.left, var), _diff(node.right, var))
    if node.op == "*":
        return _add(
            _mul(_diff(node.left, var), node.right),
            _mul(node.left, _diff(node.right, var)),
        )
    if node.op == "/":
        num = _sub(
            _mul(_diff(node.left, var), node.right),
            _mul(node.left, _diff(node.right, var)),
        )
        return _div(num, BinOp("^", node.right, Const(2.0)))
    if node.op == "^":
        if not isinstance(node.right, Const):
            raise DomainError("differentiation supports constant exponents only")
        c = node.right.value
        inner = _diff(node.left, var)
        return _mul(_mul(Const(c), BinOp("^", node.left, Const(c - 1.0))), inner)
    raise TypeError(f"unknown operator {node.op!r}")


@_diff.register
def _(node: Call, var: str) -> Node:
    if node.fn == "abs":
        return _mul(Call("sign", node.args), _diff(node.args[0], var))
    if node.fn == "sign":
        # zero almost everywhere; the jump at the kink is never sampled exactly
        return ZERO
    if node.fn == "exp":
        return _mul(node, _diff(node.args[0], var))
    if node.fn == "sqrt":
        return _div(_diff(node.args[0], var), _mul(Const(2.0), node))
    raise DomainError(f"'{node.fn}' is not differentiable in this algebra")


@_diff.register
def _(node: Bump, var: str) -> Node:
    if var != "x":
        return ZERO
    return Bump(node.center, node.radius, node.order + 1)


# ---------------------------------------------------------------------------
# textual form


@singledispatch
def _to_str(node: Node) -> str:
    raise TypeError(f"cannot render node {node!r}")


@_to_str.register
def _(node: Const) -> str:
    if node.value == math.pi:
        return "pi"
    return repr(node.value)


@_to_str.register
def _(node: Var) -> str:
    return node.name


@_to_str.register
def _(node: BinOp) -> str:
    return f"({_to_str(node.left)} {node.op} {_to_str(node.right)})"


@_to_str.register
def _(node: Call) -> str:
    return f"{node.fn}({', '.join(_to_str(a) for a in node.args)})"


@_to_str.register
def _(node: Bump) -> str:
    tag = f"bump[{node.center:g},{node.radius:g}]"
    return tag if node.order == 0 else tag + "'" * node.order


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str, extra_fns: frozenset[str] = frozenset()):
        self.tokens = self._tokenize(text)
        self.pos = 0
        self.extra_fns = extra_fns

    @staticmethod
    def _tokenize(text: str) -> list[str]:
        tokens: list[str] = []
        i, n = 0, len(text)
        while i < n:
            ch = text[i]
            if ch.isspace():
                i += 1
            elif ch in "+-*/^(),":
                tokens.append(ch)
                i += 1
            elif ch.isdigit() or ch == ".":
                j = i
                while j < n and (text[j].isdigit() or text[j] == "."):
                    j += 1
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
                tokens.append(text[i:j])
                i = j
            elif ch.isalpha():
                j = i
                while j < n and text[j].isalnum():
                    j += 1
                tokens.append(text[i:j])
                i = j
            else:
                raise DomainError(f"unexpected character {ch!r} in expression")
        return tokens

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise DomainError("unexpected end of expression")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.take()
        if got != tok:
            raise DomainError(f"expected {tok!r}, got {got!r}")

    def parse(self) -> Node:
        node = self.expr()
        if self.peek() is not None:
            raise DomainError(f"trailing tokens starting at {self.peek()!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek() in ("*", "/"):
            op = self.take()
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        node = self.base()
        if self.peek() == "^":
            self.take()
            node = BinOp("^", node, self.exponent())
        return node

    def exponent(self) -> Node:
        if self.peek() == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        neg = False
        if self.peek() == "-":
            self.take()
            neg = True
        tok = self.take()
        try:
            value = float(tok)
        except ValueError:
            raise DomainError(f"exponent must be a number, got {tok!r}") from None
        return Const(-value if neg else value)

    def base(self) -> Node:
        tok = self.take()
        if tok == "-":
            return _mul(Const(-1.0), self.factor())
        if tok == "+":
            return self.factor()
        if tok == "(":
            node = self.expr()
            self.expect(")")
            return node
        if tok in ("x", "t", "y"):
            return Var(tok)
        if tok == "pi":
            return PI
        if tok in _FUNCTIONS_1 or tok in _FUNCTIONS_2 or tok in self.extra_fns:
            self.expect("(")
            args = [self.expr()]
            if self.peek() == ",":
                self.take()
                args.append(self.expr())
            self.expect(")")
            if tok in _FUNCTIONS_1 and len(args) != 1:
                raise DomainError(f"{tok} takes one argument")
            if tok in _FUNCTIONS_2 and len(args) != 2:
                raise DomainError(f"{tok} takes two arguments")
            return Call(tok, tuple(args))
        try:
            return Const(float(tok))
        except ValueError:
            raise DomainError(f"unexpected token {tok!r}") from None


# ---------------------------------------------------------------------------
# support tracking (interval outside which the field vanishes identically)


@singledispatch
def _support(node: Node):
    return None


@_support.register
def _(node: Bump):
    return (node.center - node.radius, node.center + node.radius)


@_support.register
def _(node: BinOp):
    ls, rs = _support(node.left), _support(node.right)
    if node.op == "*":
        if ls is not None and rs is not None:
            lo, hi = max(ls[0], rs[0]), min(ls[1], rs[1])
            return (lo, hi) if lo < hi else (0.0, 0.0)
        return ls if ls is not None else rs
    if node.op in ("+", "-"):
        if ls is not None and rs is not None:
            return (min(ls[0], rs[0]), max(ls[1], rs[1]))
        return None
    if node.op == "/":
        return ls
    if node.op == "^":
        if ls is not None and isinstance(node.right, Const) and node.right.value > 0:
            return ls
        return None
    return None


@_support.register
def _(node: Call):
    if node.fn in ("abs", "sqrt", "sign"):
        return _support(node.args[0])
    return None


# ---------------------------------------------------------------------------
# public wrapper


def _as_node(obj) -> Node:
    if isinstance(obj, ScalarField):
        return obj.node
    if isinstance(obj, Node):
        return obj
    if isinstance(obj, (int, float)):
        return Const(float(obj))
    raise TypeError(f"cannot coerce {obj!r} to a scalar field")


class ScalarField:
    """Immutable symbolic function of ``x`` (and optionally ``t`` / ``y``)."""

    __slots__ = ("node",)

    def __init__(self, node: Node):
        object.__setattr__(self, "node", node)

    # construction -----------------------------------------------------
    @classmethod
    def parse(cls, text: str) -> "ScalarField":
        return cls(_Parser(text).parse())

    @classmethod
    def const(cls, value: float) -> "ScalarField":
        return cls(Const(float(value)))

    @classmethod
    def x(cls) -> "ScalarField":
        return cls(Var("x"))

    @classmethod
    def t(cls) -> "ScalarField":
        return cls(Var("t"))

    @classmethod
    def y(cls) -> "ScalarField":
        return cls(Var("y"))

    # algebra ----------------------------------------------------------
    def __add__(self, other):
        return ScalarField(_add(self.node, _as_node(other)))

    def __radd__(self, other):
        return ScalarField(_add(_as_node(other), self.node))

    def __sub__(self, other):
        return ScalarField(_sub(self.node, _as_node(other)))

    def __rsub__(self, other):
        return ScalarField(_sub(_as_node(other), self.node))

    def __mul__(self, other):
        return ScalarField(_mul(self.node, _as_node(other)))

    def __rmul__(self, other):
        return ScalarField(_mul(_as_node(other), self.node))

    def __truediv__(self, other):
        return ScalarField(_div(self.node, _as_node(other)))

    def __rtruediv__(self, other):
        return ScalarField(_div(_as_node(other), self.node))

    def __pow__(self, exponent: float):
        return ScalarField(BinOp("^", self.node, Const(float(exponent))))

    def __neg__(self):
        return ScalarField(_mul(Const(-1.0), self.node))

    def __abs__(self):
        return ScalarField(Call("abs", (self.node,)))

    # evaluation -------------------------------------------------------
    def __call__(self, x=None, t=None, y=None):
        env = {}
        if x is not None:
            env["x"] = x
        if t is not None:
            env["t"] = t
        if y is not None:
            env["y"] = y
        return _eval(self.node, env)

    def diff(self, var: str = "x") -> "ScalarField":
        return ScalarField(_diff(self.node, var))

    def substitute(self, **values: float) -> "ScalarField":
        """Replace variables with constants, e.g. ``f.substitute(y=0.5)``."""

        def walk(node: Node) -> Node:
            if isinstance(node, Var) and node.name in values:
                return Const(float(values[node.name]))
            if isinstance(node, BinOp):
                return BinOp(node.op, walk(node.left), walk(node.right))
            if isinstance(node, Call):
                return Call(node.fn, tuple(walk(a) for a in node.args))
            return node

        return ScalarField(walk(self.node))

    # inspection -------------------------------------------------------
    @property
    def variables(self) -> frozenset[str]:
        names: set[str] = set()

        def walk(node: Node) -> None:
            if isinstance(node, Var):
                names.add(node.name)
            elif isinstance(node, BinOp):
                walk(node.left)
                walk(node.right)
            elif isinstance(node, Call):
                for a in node.args:
                    walk(a)
            elif isinstance(node, Bump):
                names.add("x")

        walk(self.node)
        return frozenset(names)

    @property
    def support(self) -> tuple[float, float] | None:
        """Interval outside which the field vanishes, if one is known."""
        return _support(self.node)

    def is_identity_in_x(self) -> bool:
        return isinstance(self.node, Var) and self.node.name == "x"

    def __repr__(self) -> str:
        return f"ScalarField({_to_str(self.node)})"

    def __str__(self) -> str:
        return _to_str(self.node)

    def __eq__(self, other) -> bool:
        return isinstance(other, ScalarField) and self.node == other.node

    def __hash__(self) -> int:
        return hash(self.node)


def bump(center: float, radius: float) -> ScalarField:
    """Compactly supported C^2 bump, equal 1 at its centre, 0 off (c-r, c+r)."""
    if radius <= 0:
        raise DomainError("bump radius must be positive")
    return ScalarField(Bump(float(center), float(radius), 0))


def bump_battery(centers=(-2.0, -1.0, 0.0, 1.0, 2.0), radius: float = 3.0) -> list[ScalarField]:
    """Default battery of overlapping bumps used by the weak-form checks."""
    return [bump(c, radius) for c in centers]
