"""Recursive-descent parser and evaluator for user-supplied rate expressions.

Grammar (fixed):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' unsigned-int)?
    base   := number | ident | '(' expr ')' | func '(' expr ')' | '-' base
    func   := 'exp' | 'max0'
    ident  := [a-zA-Z_][a-zA-Z0-9_]*

max0 is the smooth positive part (quintic-smoothstep bridge of width
MAX0_WIDTH); exp is the exponential.  Evaluation is numpy-aware, so bound
variables may be scalars or arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PorecatError

MAX0_WIDTH = 1e-6
FUNCTIONS = ("exp", "max0")


# --- smooth positive part and saturation kernels ---

def smooth_pos(x, width: float):
    """C2 positive part: 0 for x<=0, x for x>=width, quintic bridge between.

    Monotone, 0 <= smooth_pos(x) <= max(x, 0) everywhere, which keeps the
    modified-Langmuir rate inside its linear bounds.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.clip(x / width, 0.0, 1.0)
    s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    out = np.where(x >= width, x, x * s)
    out = np.where(x <= 0.0, 0.0, out)
    return out if out.ndim else float(out)


def smooth_pos_prime(x, width: float):
    """Derivative of smooth_pos; bounded in [0, ~1.77]."""
    x = np.asarray(x, dtype=np.float64)
    t = np.clip(x / width, 0.0, 1.0)
    s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    ds = 30.0 * t * t * (1.0 - t) ** 2
    out = np.where(x >= width, 1.0, s + t * ds)
    out = np.where(x <= 0.0, 0.0, out)
    return out if out.ndim else float(out)


def saturate(x, cap: float):
    """Smooth bounded monotone map with saturate(0)=0 and saturate(x)<=min(x,cap) for x>=0."""
    x = np.asarray(x, dtype=np.float64)
    out = cap * np.tanh(x / cap)
    return out if out.ndim else float(out)


def saturate_prime(x, cap: float):
    x = np.asarray(x, dtype=np.float64)
    th = np.tanh(x / cap)
    out = 1.0 - th * th
    return out if out.ndim else float(out)


# --- AST ---

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "RateExpr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "RateExpr"
    right: "RateExpr"


@dataclass(frozen=True)
class Pow:
    base: "RateExpr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "RateExpr"


@dataclass(frozen=True)
class _Max0Prime:
    # internal node produced by differentiate(); not expressible in the grammar
    arg: "RateExpr"


RateExpr = Num | Var | Neg | BinOp | Pow | Call | _Max0Prime


class RateParseError(PorecatError):
    """Syntax error with character offset and the token set that was expected."""

    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        super().__init__(f"{message} at position {position}" +
                         (f" (expected {', '.join(expected)})" if expected else ""))
        self.position = position
        self.expected = expected


class RateEvalError(PorecatError):
    """Evaluation failure: an identifier was not bound."""


# --- tokenizer ---

_OPS = "+-*/^()"


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Returns (kind, value, position) triples; kind in {num, ident, op, eof}."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            start = i
            while i < n and text[i].isdigit():
                i += 1
            if i < n and text[i] == ".":
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            lit = text[start:i]
            try:
                float(lit)
            except ValueError:
                raise RateParseError(f"malformed number {lit!r}", start) from None
            tokens.append(("num", lit, start))
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            tokens.append(("ident", text[start:i], start))
            continue
        raise RateParseError(f"unexpected character {ch!r}", i)
    tokens.append(("eof", "", n))
    return tokens


# --- parser ---

_BASE_EXPECTED = ("number", "identifier", "'('", "'-'")


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, val, at = self.peek()
        if kind == "op" and val == op:
            return self.advance()
        raise RateParseError(f"unexpected {val or 'end of input'!r}", at, (f"'{op}'",))

    def parse(self) -> RateExpr:
        node = self.expr()
        kind, val, at = self.peek()
        if kind != "eof":
            raise RateParseError(f"unexpected trailing {val!r}", at,
                                 ("'+'", "'-'", "'*'", "'/'", "'^'", "end of input"))
        return node

    def expr(self) -> RateExpr:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self) -> RateExpr:
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = BinOp(val, node, self.factor())
            else:
                return node

    def factor(self) -> RateExpr:
        node = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            kind, val, at = self.peek()
            if kind != "num" or not val.isdigit():
                raise RateParseError(f"unexpected {val or 'end of input'!r}", at,
                                     ("unsigned integer exponent",))
            self.advance()
            node = Pow(node, int(val))
        return node

    def base(self) -> RateExpr:
        kind, val, at = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(val))
        if kind == "ident":
            self.advance()
            nkind, nval, _ = self.peek()
            if nkind == "op" and nval == "(":
                if val not in FUNCTIONS:
                    raise RateParseError(f"unknown function {val!r}", at,
                                         tuple(f"'{f}'" for f in FUNCTIONS))
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            return Var(val)
        if kind == "op" and val == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.base())
        raise RateParseError(f"unexpected {val or 'end of input'!r}", at, _BASE_EXPECTED)


def parse(text: str) -> RateExpr:
    """Parse a rate expression; raises RateParseError with the offending offset."""
    return _Parser(text).parse()


# --- evaluation ---

def evaluate(node: RateExpr, bindings: dict):
    """Evaluate with the given variable bindings (scalars or numpy arrays)."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return bindings[node.name]
        except KeyError:
            raise RateEvalError(f"unbound identifier {node.name!r}") from None
    if isinstance(node, Neg):
        return -evaluate(node.operand, bindings)
    if isinstance(node, BinOp):
        a = evaluate(node.left, bindings)
        b = evaluate(node.right, bindings)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Pow):
        return evaluate(node.base, bindings) ** node.exponent
    if isinstance(node, Call):
        a = evaluate(node.arg, bindings)
        if node.func == "exp":
            return np.exp(a)
        return smooth_pos(a, MAX0_WIDTH)
    if isinstance(node, _Max0Prime):
        return smooth_pos_prime(evaluate(node.arg, bindings), MAX0_WIDTH)
    raise TypeError(f"not a rate expression node: {node!r}")


def free_variables(node: RateExpr) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, BinOp):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, Pow):
        return free_variables(node.base)
    if isinstance(node, (Call, _Max0Prime)):
        return free_variables(node.arg)
    return set()


# --- pretty printer (minimal parentheses; reparse is structurally equal) ---

def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _as_base(node: RateExpr) -> str:
    # grammar position where only a `base` is allowed (operand of '-' or '^')
    if isinstance(node, (Num, Var, Call, Neg)):
        return to_string(node)
    return "(" + to_string(node) + ")"


def _render(node: RateExpr, context: int) -> str:
    # precedence: additive 1, multiplicative 2, everything atomic 3
    if isinstance(node, BinOp):
        prec = 1 if node.op in "+-" else 2
        text = _render(node.left, prec) + node.op + _render(node.right, prec + 1)
        return "(" + text + ")" if prec < context else text
    return to_string(node)


def to_string(node: RateExpr) -> str:
    if isinstance(node, Num):
        return _fmt_number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + _as_base(node.operand)
    if isinstance(node, BinOp):
        return _render(node, 0)
    if isinstance(node, Pow):
        return _as_base(node.base) + "^" + str(node.exponent)
    if isinstance(node, Call):
        return node.func + "(" + to_string(node.arg) + ")"
    raise TypeError(f"cannot print {node!r}")


# --- symbolic differentiation (for Newton Jacobians of custom rates) ---

def _add(a: RateExpr, b: RateExpr) -> RateExpr:
    if a == Num(0.0):
        return b
    if b == Num(0.0):
        return a
    return BinOp("+", a, b)


def _mul(a: RateExpr, b: RateExpr) -> RateExpr:
    if a == Num(0.0) or b == Num(0.0):
        return Num(0.0)
    if a == Num(1.0):
        return b
    if b == Num(1.0):
        return a
    return BinOp("*", a, b)


def differentiate(node: RateExpr, var: str) -> RateExpr:
    """d(node)/d(var).  The result is for evaluation only: derivatives of max0
    use an internal node that the printer does not accept."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0) if node.name == var else Num(0.0)
    if isinstance(node, Neg):
        d = differentiate(node.operand, var)
        return Num(0.0) if d == Num(0.0) else Neg(d)
    if isinstance(node, BinOp):
        da = differentiate(node.left, var)
        db = differentiate(node.right, var)
        if node.op == "+":
            return _add(da, db)
        if node.op == "-":
            if db == Num(0.0):
                return da
            return BinOp("-", da, db)
        if node.op == "*":
            return _add(_mul(da, node.right), _mul(node.left, db))
        # quotient rule
        num = BinOp("-", _mul(da, node.right), _mul(node.left, db))
        return BinOp("/", num, Pow(node.right, 2))
    if isinstance(node, Pow):
        if node.exponent == 0:
            return Num(0.0)
        db = differentiate(node.base, var)
        inner = _mul(Num(float(node.exponent)), Pow(node.base, node.exponent - 1)) \
            if node.exponent > 1 else Num(float(node.exponent))
        return _mul(inner, db)
    if isinstance(node, Call):
        da = differentiate(node.arg, var)
        outer = Call("exp", node.arg) if node.func == "exp" else _Max0Prime(node.arg)
        return _mul(outer, da)
    raise TypeError(f"cannot differentiate {node!r}")
