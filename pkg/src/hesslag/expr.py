"""Expression language for potentials and Lagrangians.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?
    unary  := '-' unary | atom
    atom   := number | ident | func '(' expr ')' | '(' expr ')'

``func`` is one of log, exp, sqrt, sin, cos, tanh and ``pi`` is a predefined
constant.  The exponent of ``^`` must start with a numeric literal or a
parenthesis.  Note that by this grammar ``-y^2`` is ``(-y)^2``.

Evaluation is generic: plain numbers go through :mod:`math`, numpy arrays
through numpy (used by the finite-difference oracle), and anything else must
provide ``log``, ``exp``, ... methods and the arithmetic dunders (jets).
"""

from __future__ import annotations

import math
import numbers
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import (
    DomainError,
    ExprSyntaxError,
    UnboundVariableError,
    UnknownFunctionError,
    UnknownVariableError,
)

FUNCTIONS = ("log", "exp", "sqrt", "sin", "cos", "tanh")
CONSTANTS = {"pi": math.pi}

_NUMBER = re.compile(r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Const, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class ScalarField:
    """A parsed expression together with the variables it may reference."""

    ast: Node
    vars: tuple[str, ...]
    text: str = ""

    @property
    def used_vars(self) -> frozenset[str]:
        return frozenset(_collect_vars(self.ast))

    def __call__(self, bindings: Mapping[str, object]):
        return evaluate(self, bindings)

    def __str__(self) -> str:
        return to_text(self.ast)


def _collect_vars(node: Node):
    if isinstance(node, Var):
        yield node.name
    elif isinstance(node, Neg):
        yield from _collect_vars(node.operand)
    elif isinstance(node, BinOp):
        yield from _collect_vars(node.left)
        yield from _collect_vars(node.right)
    elif isinstance(node, Call):
        yield from _collect_vars(node.arg)


# --- tokenizer / parser ----------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "eof"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            tokens.append(_Token("num", m.group(), i))
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(), i))
            i = m.end()
            continue
        if ch in "+-*/^()":
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, expected_vars: Sequence[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.expected = set(expected_vars)

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def _fail(self, expected: str):
        tok = self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {found}", tok.pos, expected)

    def _is_op(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "eof":
            self._fail("operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._is_op("+", "-"):
            op = self._advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self._is_op("*", "/"):
            op = self._advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        base = self.unary()
        if self._is_op("^"):
            self._advance()
            if not (self.tok.kind == "num" or self._is_op("(")):
                self._fail("numeric literal or '(' after '^'")
            return BinOp("^", base, self.factor())
        return base

    def unary(self) -> Node:
        if self._is_op("-"):
            self._advance()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self._advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self._advance()
            if self._is_op("("):
                if tok.text not in FUNCTIONS:
                    raise UnknownFunctionError(tok.text, tok.pos)
                self._advance()
                arg = self.expr()
                if not self._is_op(")"):
                    self._fail("')'")
                self._advance()
                return Call(tok.text, arg)
            if tok.text in FUNCTIONS:
                self._fail("'(' after function name")
            if tok.text in CONSTANTS:
                return Const(tok.text)
            if tok.text not in self.expected:
                raise UnknownVariableError(tok.text, tok.pos)
            return Var(tok.text)
        if self._is_op("("):
            self._advance()
            node = self.expr()
            if not self._is_op(")"):
                self._fail("')'")
            self._advance()
            return node
        self._fail("number, identifier or '('")


def parse(text: str, expected_vars: Sequence[str]) -> ScalarField:
    """Parse ``text`` into a :class:`ScalarField` over ``expected_vars``."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0, "expression")
    ast = _Parser(text, expected_vars).parse()
    return ScalarField(ast, tuple(expected_vars), text)


# --- pretty printer --------------------------------------------------------

def to_text(node: Node) -> str:
    """Render an AST back to source; parenthesized enough to re-parse identically."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, (Const, Var)):
        return node.name
    if isinstance(node, Neg):
        return f"-({to_text(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if node.op == "^":
        return f"({to_text(node.left)})^({to_text(node.right)})"
    return f"({to_text(node.left)} {node.op} {to_text(node.right)})"


# --- evaluation --------------------------------------------------------------

def _is_plain(x) -> bool:
    return isinstance(x, numbers.Real)


def _is_array(x) -> bool:
    return isinstance(x, np.ndarray)


def _domain(reason: str, node: Node):
    raise DomainError(reason, to_text(node))


def _call(node: Call, a):
    name = node.func
    if _is_plain(a):
        a = float(a)
        if name == "log":
            if a <= 0.0:
                _domain("log of non-positive argument", node)
            return math.log(a)
        if name == "sqrt":
            if a < 0.0:
                _domain("sqrt of negative argument", node)
            return math.sqrt(a)
        if name == "exp":
            try:
                return math.exp(a)
            except OverflowError:
                _domain("exp overflow", node)
        return getattr(math, name)(a)
    if _is_array(a):
        if name == "log" and np.any(a <= 0.0):
            _domain("log of non-positive argument", node)
        if name == "sqrt" and np.any(a < 0.0):
            _domain("sqrt of negative argument", node)
        return getattr(np, name)(a)
    try:
        return getattr(a, name)()
    except DomainError as exc:
        # jets report the reason; attach the subexpression here
        raise DomainError(exc.reason, to_text(node)) from None


def _is_integral(b) -> bool:
    return _is_plain(b) and float(b).is_integer()


def _power(node: BinOp, a, b):
    if _is_integral(b):
        if _is_plain(a):
            a = float(a)
            if a == 0.0 and b < 0:
                _domain("division by zero", node)
            return a ** float(b)
        if _is_array(a):
            if b < 0 and np.any(a == 0.0):
                _domain("division by zero", node)
            return a ** float(b)
        try:
            return a ** float(b)
        except DomainError as exc:
            raise DomainError(exc.reason, to_text(node)) from None
    # non-integer (or variable) exponent: exp(b * log(a)), a > 0
    log_node = Call("log", node.left)
    exp_node = Call("exp", node)
    return _call(exp_node, b * _call(log_node, a))


def _divide(node: BinOp, a, b):
    if _is_plain(b):
        if float(b) == 0.0:
            _domain("division by zero", node)
    elif _is_array(b):
        if np.any(b == 0.0):
            _domain("division by zero", node)
    try:
        return a / b
    except DomainError as exc:
        raise DomainError(exc.reason, to_text(node)) from None


def _eval(node: Node, env: Mapping[str, object]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundVariableError(node.name) from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        return _call(node, _eval(node.arg, env))
    a = _eval(node.left, env)
    b = _eval(node.right, env)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _divide(node, a, b)
    return _power(node, a, b)


def evaluate(field: ScalarField, bindings: Mapping[str, object]):
    """Evaluate ``field`` with variables taken from ``bindings``.

    Values may be floats, numpy arrays (elementwise) or jets; constants stay
    plain floats and mix with them through the usual operator overloads.
    """
    for name in field.used_vars:
        if name not in bindings:
            raise UnboundVariableError(name)
    return _eval(field.ast, bindings)
