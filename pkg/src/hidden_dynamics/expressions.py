"""Scalar math expressions: parsing, evaluation and symbolic differentiation.

Expressions are immutable trees.  Every vector-field component, switching
function and nonlinear term handled by the package is one of these.  The
grammar is ordinary infix with ``^`` for powers::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('+' | '-') unary | power
    power := atom ('^' unary)?
    atom  := number | name | name '(' expr ')' | '(' expr ')'

Implicit multiplication (``2x``) is rejected.  Variable names are free-form
identifiers; by convention the state is ``x1 .. xn``, the switching
parameter is ``l`` and small parameters are ``eps`` and ``mu``.

Functions that have no closed form (a transition function clipped to
``sign(s)`` outside ``[-1, 1]``, a numerically inverted transition, ...)
enter trees through :class:`ScalarFunction` and the :class:`Apply` node.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

from .errors import DerivativeError, DomainError, ParseError, UnboundVariableError

__all__ = [
    "Expression",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Apply",
    "ScalarFunction",
    "parse",
    "evaluate",
    "differentiate",
    "substitute",
    "to_string",
    "const",
    "var",
    "add",
    "sub",
    "mul",
    "div",
    "power",
    "neg",
    "call",
    "UNARY_FUNCTIONS",
]


# ----------------------------------------------------------------------------
# nodes


class Expression:
    """Base class of all expression nodes."""

    __slots__ = ()

    def evaluate(self, bindings: Mapping[str, float]) -> float:
        value = self._fn(bindings)
        if value != value:
            raise DomainError(f"evaluation of {self} produced NaN")
        return value

    def __call__(self, **bindings: float) -> float:
        return self.evaluate(bindings)

    def __str__(self):
        return to_string(self)

    def diff(self, name: str) -> "Expression":
        return differentiate(self, name)

    def subs(self, mapping: Mapping[str, "Expression | float"]) -> "Expression":
        return substitute(self, mapping)

    @property
    def free_variables(self) -> frozenset:
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        return not self.free_variables


@dataclass(frozen=True, eq=True)
class Const(Expression):
    value: float

    @cached_property
    def _fn(self):
        v = float(self.value)
        return lambda env: v

    @property
    def free_variables(self):
        return frozenset()


@dataclass(frozen=True, eq=True)
class Var(Expression):
    name: str

    @cached_property
    def _fn(self):
        name = self.name

        def fn(env):
            try:
                return float(env[name])
            except KeyError:
                raise UnboundVariableError(name) from None

        return fn

    @property
    def free_variables(self):
        return frozenset((self.name,))


def _checked(name, f):
    def wrapped(a):
        try:
            return f(a)
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise DomainError(f"{name}({a!r}): {exc}") from None

    return wrapped


def _sign(a):
    return (a > 0) - (a < 0) + 0.0


def _log(a):
    if a <= 0:
        raise DomainError(f"log of non-positive value {a!r}")
    return math.log(a)


def _sqrt(a):
    if a < 0:
        raise DomainError(f"sqrt of negative value {a!r}")
    return math.sqrt(a)


# name -> evaluator; derivatives live in _unary_derivative
UNARY_FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": _checked("sin", math.sin),
    "cos": _checked("cos", math.cos),
    "exp": _checked("exp", math.exp),
    "tanh": math.tanh,
    "abs": abs,
    "sign": _sign,
    "log": _log,
    "sqrt": _sqrt,
}


@dataclass(frozen=True, eq=True)
class Unary(Expression):
    op: str  # 'neg' or a key of UNARY_FUNCTIONS
    arg: Expression

    @cached_property
    def _fn(self):
        inner = self.arg._fn
        if self.op == "neg":
            return lambda env: -inner(env)
        f = UNARY_FUNCTIONS[self.op]
        return lambda env: f(inner(env))

    @cached_property
    def free_variables(self):
        return self.arg.free_variables


def _pow(a, b):
    if float(b).is_integer() and abs(b) < 2**31:
        k = int(b)
        if a == 0.0 and k < 0:
            raise DomainError(f"0 raised to negative power {b!r}")
        try:
            return a**k
        except OverflowError:
            raise DomainError(f"overflow in {a!r}^{b!r}") from None
    if a < 0:
        raise DomainError(f"negative base {a!r} with non-integer exponent {b!r}")
    if a == 0.0:
        if b < 0:
            raise DomainError(f"0 raised to negative power {b!r}")
        return 0.0
    try:
        return math.pow(a, b)
    except OverflowError:
        raise DomainError(f"overflow in {a!r}^{b!r}") from None


def _div(a, b):
    if b == 0.0:
        raise DomainError(f"division by zero ({a!r}/0)")
    return a / b


@dataclass(frozen=True, eq=True)
class Binary(Expression):
    op: str  # one of + - * / ^
    left: Expression
    right: Expression

    @cached_property
    def _fn(self):
        lf, rf = self.left._fn, self.right._fn
        op = self.op
        if op == "+":
            return lambda env: lf(env) + rf(env)
        if op == "-":
            return lambda env: lf(env) - rf(env)
        if op == "*":
            return lambda env: lf(env) * rf(env)
        if op == "/":
            return lambda env: _div(lf(env), rf(env))
        if op == "^":
            return lambda env: _pow(lf(env), rf(env))
        raise ValueError(f"unknown binary operator {op!r}")

    @cached_property
    def free_variables(self):
        return self.left.free_variables | self.right.free_variables


@dataclass(frozen=True, eq=False)
class ScalarFunction:
    """A named real function of one real variable backed by Python code.

    Parameters
    ----------
    name : str
        Identifier used when printing and parsing.
    func : callable
        ``float -> float``.
    derivative : ScalarFunction, optional
        Needed only if trees containing this function get differentiated.
    """

    name: str
    func: Callable[[float], float]
    derivative: "ScalarFunction | None" = field(default=None, repr=False)

    def __call__(self, s: float) -> float:
        return self.func(s)


@dataclass(frozen=True, eq=True)
class Apply(Expression):
    function: ScalarFunction
    arg: Expression

    @cached_property
    def _fn(self):
        f = self.function.func
        inner = self.arg._fn
        return lambda env: float(f(inner(env)))

    @cached_property
    def free_variables(self):
        return self.arg.free_variables


# ----------------------------------------------------------------------------
# constructors with constant folding


def const(value: float) -> Const:
    return Const(float(value))


def var(name: str) -> Var:
    return Var(name)


def _as_expr(e) -> Expression:
    if isinstance(e, Expression):
        return e
    return Const(float(e))


def _is(e, value):
    return isinstance(e, Const) and e.value == value


def _fold(op, a, b):
    try:
        return Const(Binary(op, a, b).evaluate({}))
    except DomainError:
        return Binary(op, a, b)


def add(a, b) -> Expression:
    a, b = _as_expr(a), _as_expr(b)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold("+", a, b)
    return Binary("+", a, b)


def sub(a, b) -> Expression:
    a, b = _as_expr(a), _as_expr(b)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold("-", a, b)
    return Binary("-", a, b)


def mul(a, b) -> Expression:
    a, b = _as_expr(a), _as_expr(b)
    if _is(a, 0.0) or _is(b, 0.0):
        return Const(0.0)
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold("*", a, b)
    if isinstance(b, Const):
        a, b = b, a
    if isinstance(a, Const):
        if _is(a, -1.0):
            return neg(b)
        # c1 * (c2 * x) -> (c1 c2) * x
        if isinstance(b, Binary) and b.op == "*" and isinstance(b.left, Const):
            return mul(a.value * b.left.value, b.right)
    return Binary("*", a, b)


def div(a, b) -> Expression:
    a, b = _as_expr(a), _as_expr(b)
    if _is(b, 1.0):
        return a
    if _is(a, 0.0) and not _is(b, 0.0):
        return Const(0.0)
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold("/", a, b)
    return Binary("/", a, b)


def power(a, b) -> Expression:
    a, b = _as_expr(a), _as_expr(b)
    if _is(b, 1.0):
        return a
    if _is(b, 0.0):
        return Const(1.0)
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold("^", a, b)
    return Binary("^", a, b)


def neg(a) -> Expression:
    a = _as_expr(a)
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def call(name_or_function, arg) -> Expression:
    """Apply a built-in unary function (by name) or a :class:`ScalarFunction`."""
    arg = _as_expr(arg)
    if isinstance(name_or_function, ScalarFunction):
        node = Apply(name_or_function, arg)
    else:
        if name_or_function not in UNARY_FUNCTIONS:
            raise ValueError(f"unknown function {name_or_function!r}")
        node = Unary(name_or_function, arg)
    if isinstance(arg, Const):
        try:
            return Const(node.evaluate({}))
        except DomainError:
            pass
    return node


# ----------------------------------------------------------------------------
# evaluation / differentiation / substitution


def evaluate(e: Expression, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e`` in IEEE double precision.

    Raises
    ------
    UnboundVariableError
        A free variable of ``e`` has no binding.
    DomainError
        Division by zero, ``0^negative``, a non-integer power of a negative
        number, overflow, or a NaN result.
    """
    return e.evaluate(bindings)


def _unary_derivative(op: str, a: Expression) -> Expression:
    if op == "sin":
        return call("cos", a)
    if op == "cos":
        return neg(call("sin", a))
    if op == "exp":
        return call("exp", a)
    if op == "tanh":
        return sub(1.0, power(call("tanh", a), 2.0))
    if op == "abs":
        # sign(0) = 0 by convention
        return call("sign", a)
    if op == "sign":
        return Const(0.0)
    if op == "log":
        return div(1.0, a)
    if op == "sqrt":
        return div(0.5, call("sqrt", a))
    raise DerivativeError(f"no derivative rule for {op!r}")


def differentiate(e: Expression, name: str) -> Expression:
    """Exact symbolic derivative of ``e`` with respect to variable ``name``.

    Trivial subtrees are constant-folded; no other simplification happens.
    """
    if name not in e.free_variables:
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0)
    if isinstance(e, Unary):
        da = differentiate(e.arg, name)
        if e.op == "neg":
            return neg(da)
        return mul(_unary_derivative(e.op, e.arg), da)
    if isinstance(e, Apply):
        fprime = e.function.derivative
        if fprime is None:
            raise DerivativeError(f"function {e.function.name!r} has no derivative")
        return mul(Apply(fprime, e.arg), differentiate(e.arg, name))
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = differentiate(a, name), differentiate(b, name)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        if e.op == "/":
            if isinstance(db, Const) and db.value == 0.0:
                return div(da, b)
            return div(sub(mul(da, b), mul(a, db)), power(b, 2.0))
        if e.op == "^":
            if name not in b.free_variables:
                return mul(mul(b, power(a, sub(b, 1.0))), da)
            # a^b (b' log a + b a'/a)
            return mul(e, add(mul(db, call("log", a)), div(mul(b, da), a)))
    raise DerivativeError(f"cannot differentiate node {e!r}")


def substitute(e: Expression, mapping: Mapping[str, "Expression | float"]) -> Expression:
    """Replace variables by expressions (or numbers), re-folding constants."""
    mapping = {k: _as_expr(v) for k, v in mapping.items()}
    return _subs(e, mapping)


def _subs(e, mapping):
    if not (e.free_variables & mapping.keys()):
        return e
    if isinstance(e, Var):
        return mapping[e.name]
    if isinstance(e, Unary):
        a = _subs(e.arg, mapping)
        return neg(a) if e.op == "neg" else call(e.op, a)
    if isinstance(e, Apply):
        return call(e.function, _subs(e.arg, mapping))
    if isinstance(e, Binary):
        a, b = _subs(e.left, mapping), _subs(e.right, mapping)
        return {"+": add, "-": sub, "*": mul, "/": div, "^": power}[e.op](a, b)
    return e


# ----------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _format_number(v: float) -> str:
    if math.isinf(v) or math.isnan(v):
        raise ValueError(f"cannot print non-finite constant {v!r}")
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _prec(e):
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return _PREC["neg"]
    if isinstance(e, Const) and (e.value < 0 or (e.value == 0 and math.copysign(1, e.value) < 0)):
        return _PREC["neg"]
    return _ATOM


def to_string(e: Expression) -> str:
    """Infix text that :func:`parse` reads back to an equivalent tree.

    Constants are printed with ``repr`` so values round-trip exactly.
    """
    if isinstance(e, Const):
        return _format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Apply):
        return f"{e.function.name}({to_string(e.arg)})"
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_string(e.arg)
            if _prec(e.arg) <= _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{e.op}({to_string(e.arg)})"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        ls, rs = to_string(e.left), to_string(e.right)
        lp, rp = _prec(e.left), _prec(e.right)
        if e.op == "^":
            if lp <= p:
                ls = f"({ls})"
            if rp < p:
                rs = f"({rs})"
            return f"{ls}^{rs}"
        if lp < p:
            ls = f"({ls})"
        if rp < p or (rp == p and e.op in "-/") or (rp == p and e.op == "*" and e.right.op == "/"):
            rs = f"({rs})"
        elif rp == _PREC["neg"]:
            rs = f"({rs})"
        return f"{ls}{e.op}{rs}"
    raise TypeError(f"not an expression: {e!r}")


# ----------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_CONSTANTS = {"pi": math.pi}


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source, functions):
        self.tokens = _tokenize(source)
        self.i = 0
        self.functions = functions

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            if kind == "end" and value == ")":
                raise ParseError("unbalanced parentheses: missing ')'", pos)
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self):
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            if text == ")":
                raise ParseError("unbalanced parentheses: unexpected ')'", pos)
            raise ParseError(f"unexpected token {text!r} (implicit multiplication is not allowed)", pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Binary(op, e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Binary(op, e, rhs)
        return e

    def unary(self):
        kind, text, pos = self.peek()
        if kind == "op" and text in ("+", "-"):
            self.take()
            inner = self.unary()
            return inner if text == "+" else neg(inner) if isinstance(inner, Const) else Unary("neg", inner)
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            exponent = self.unary()
            return Binary("^", base, exponent)
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                self.take()
                arg = self.expr()
                self.expect(")")
                if text in UNARY_FUNCTIONS:
                    return Unary(text, arg)
                if text in self.functions:
                    return Apply(self.functions[text], arg)
                raise ParseError(f"unknown function {text!r}", pos)
            if text in _CONSTANTS:
                return Const(_CONSTANTS[text])
            return Var(text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        if text == ")":
            raise ParseError("unbalanced parentheses: unexpected ')'", pos)
        raise ParseError(f"unexpected token {text!r}", pos)


def parse(source: str, functions: Mapping[str, ScalarFunction] | None = None) -> Expression:
    """Parse infix text into an :class:`Expression`.

    Parameters
    ----------
    source : str
        Expression text, e.g. ``"x1^10/(1+x1^10)"``.
    functions : mapping, optional
        Extra named :class:`ScalarFunction` objects callable from the text.

    Raises
    ------
    ParseError
        Syntax error, unknown function or unbalanced parentheses; carries the
        character position.
    """
    if isinstance(source, Expression):
        return source
    if isinstance(source, (int, float)):
        return Const(float(source))
    return _Parser(source, dict(functions or {})).parse()
