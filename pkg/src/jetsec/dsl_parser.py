"""A small expression language for user-supplied functions of ``x``.

Grammar (whitespace-insensitive)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | primary
    primary := NUMBER | "x" | "(" expr ")"
             | FUNC "(" expr ")"            FUNC in exp, tanh, atan, sinh
             | "pow" "(" expr "," INT ")"   INT >= 0
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import mpmath

from .jet_core import (
    Jet,
    JetError,
    constant_jet,
    identity_jet,
    jet_add,
    jet_atan,
    jet_divide,
    jet_exp,
    jet_multiply,
    jet_pow,
    jet_scale,
    jet_sinh,
    jet_sub,
    jet_tanh,
)
from .smooth_expr import FULL_RANGE, ExprError, InversionError, SmoothExpr, bracketed_inverse, register_kind

FUNCTIONS = ("exp", "tanh", "atan", "sinh")


class DslError(ValueError):
    pass


class DslSyntaxError(DslError):
    def __init__(self, offset: int, expected, found: str):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        self.found = found
        super().__init__(f"syntax error at offset {offset}: expected one of {', '.join(self.expected)}; found {found}")


class UnknownFunctionError(DslError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f'unknown function "{name}" at offset {offset}')


class DslEvalError(DslError):
    pass


class NotADiffeoError(DslError):
    def __init__(self, message: str, point: float | None = None):
        self.point = point
        super().__init__(message)


# -- AST ----------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


@dataclass(frozen=True)
class Pow:
    base: object
    k: int


# -- tokenizer ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # "num", "name", "op", "end"
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:]
            if rest.strip() == "":
                toks.append(_Tok("end", "", len(text)))
                return toks
            off = pos + (len(rest) - len(rest.lstrip()))
            raise DslSyntaxError(off, {"number", "x", "function", "(", "-"}, repr(text[off]))
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _found(self) -> str:
        return "end of input" if self.tok.kind == "end" else repr(self.tok.text)

    def expect(self, text: str):
        if self.tok.text != text or self.tok.kind != "op":
            raise DslSyntaxError(self.tok.offset, {text}, self._found())
        self.i += 1

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise DslSyntaxError(self.tok.offset, {"+", "-", "*", "/", "end of input"}, self._found())
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.i += 1
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            value = float(tok.text)
            if not math.isfinite(value):
                raise DslSyntaxError(tok.offset, {"finite number"}, repr(tok.text))
            return Num(value)
        if tok.kind == "op" and tok.text == "(":
            self.i += 1
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "name":
            self.i += 1
            if tok.text == "x":
                return Var()
            if tok.text == "pow":
                self.expect("(")
                base = self.expr()
                self.expect(",")
                k_tok = self.tok
                if k_tok.kind != "num" or not k_tok.text.isdigit():
                    raise DslSyntaxError(k_tok.offset, {"non-negative integer"}, self._found())
                self.i += 1
                self.expect(")")
                return Pow(base, int(k_tok.text))
            if tok.text not in FUNCTIONS:
                raise UnknownFunctionError(tok.text, tok.offset)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(tok.text, arg)
        raise DslSyntaxError(tok.offset, {"number", "x", "function", "(", "-"}, self._found())


def parse(text: str):
    return _Parser(text).parse()


# -- printing -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(node) -> str:
    """Render with the minimal parentheses needed to re-parse to the same tree."""

    def prec(n):
        if isinstance(n, BinOp):
            return _PREC[n.op]
        if isinstance(n, Neg):
            return 3
        return 4

    def show(n) -> str:
        if isinstance(n, Var):
            return "x"
        if isinstance(n, Num):
            return repr(n.value)
        if isinstance(n, Neg):
            inner = show(n.arg)
            return "-" + (inner if prec(n.arg) >= 3 else f"({inner})")
        if isinstance(n, Call):
            return f"{n.fn}({show(n.arg)})"
        if isinstance(n, Pow):
            return f"pow({show(n.base)}, {n.k})"
        p = _PREC[n.op]
        left = show(n.left)
        if prec(n.left) < p:
            left = f"({left})"
        right = show(n.right)
        if prec(n.right) <= p:
            right = f"({right})"
        return f"{left} {n.op} {right}"

    return show(node)


# -- evaluation ---------------------------------------------------------------

def _lib(x):
    return mpmath if isinstance(x, mpmath.mpf) else math


def ast_eval(node, x):
    lib = _lib(x)

    def ev(n):
        if isinstance(n, Var):
            return x
        if isinstance(n, Num):
            return n.value + 0 * x
        if isinstance(n, Neg):
            return -ev(n.arg)
        if isinstance(n, Pow):
            return ev(n.base) ** n.k
        if isinstance(n, Call):
            return getattr(lib, n.fn)(ev(n.arg))
        a, b = ev(n.left), ev(n.right)
        if n.op == "+":
            return a + b
        if n.op == "-":
            return a - b
        if n.op == "*":
            return a * b
        if b == 0:
            raise DslEvalError(f"division by zero at x = {float(x)!r}")
        return a / b

    try:
        v = ev(node)
    except OverflowError:
        raise DslEvalError(f"overflow at x = {float(x)!r}") from None
    if not (math.isfinite(v) if not isinstance(v, mpmath.mpf) else mpmath.isfinite(v)):
        raise DslEvalError(f"non-finite value at x = {float(x)!r}")
    return v


_JET_FUNCS = {"exp": jet_exp, "tanh": jet_tanh, "atan": jet_atan, "sinh": jet_sinh}


def ast_jet(node, x, order: int) -> Jet:
    def jt(n) -> Jet:
        if isinstance(n, Var):
            return identity_jet(x, order)
        if isinstance(n, Num):
            return constant_jet(x, n.value + 0 * x, order)
        if isinstance(n, Neg):
            return jet_scale(jt(n.arg), -1)
        if isinstance(n, Pow):
            return jet_pow(jt(n.base), n.k)
        if isinstance(n, Call):
            return _JET_FUNCS[n.fn](jt(n.arg))
        a, b = jt(n.left), jt(n.right)
        if n.op == "+":
            return jet_add(a, b)
        if n.op == "-":
            return jet_sub(a, b)
        if n.op == "*":
            return jet_multiply(a, b)
        if b.derivs[0] == 0:
            raise DslEvalError(f"division by zero at x = {float(x)!r}")
        return jet_divide(a, b)

    try:
        return jt(node)
    except OverflowError:
        raise DslEvalError(f"overflow at x = {float(x)!r}") from None
    except JetError as exc:
        raise DslEvalError(str(exc)) from None


# -- validated diffeomorphism handle ------------------------------------------

def chebyshev_points(lo: float, hi: float, n: int) -> list[float]:
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return sorted(mid + half * math.cos((2 * k + 1) * math.pi / (2 * n)) for k in range(n))


class DslFunction(SmoothExpr):
    """A parsed function validated as increasing on ``window``.

    Inversion is bracketed inside the window.  ``surjective`` is a tail
    heuristic: both ends must keep growing far outside the window.
    """

    kind = "dsl"

    def __init__(self, source: str, window: tuple[float, float], samples: int, surjective: bool, ast=None):
        self.source = source
        self.ast = parse(source) if ast is None else ast
        self.window = (float(window[0]), float(window[1]))
        self.samples = int(samples)
        self.surjective = bool(surjective)

    @property
    def monotone(self):
        return 1

    @property
    def range(self):
        if self.surjective:
            return FULL_RANGE
        return (self.eval(self.window[0]), self.eval(self.window[1]))

    def eval(self, x):
        return ast_eval(self.ast, x)

    def jet(self, x, order):
        j = ast_jet(self.ast, x, order)
        return Jet(j.base_point, (self.eval(x),) + j.derivs[1:])

    def inverse_eval(self, y):
        lo, hi = self.window
        if not self.eval(lo) <= y <= self.eval(hi):
            raise InversionError(
                f"value {float(y)!r} outside the validated window image [{self.eval(lo)!r}, {self.eval(hi)!r}]"
            )
        return bracketed_inverse(self, y, lo, hi)

    def to_dict(self):
        return {"kind": self.kind, "source": self.source, "window": list(self.window), "samples": self.samples}

    def __eq__(self, other):
        return isinstance(other, DslFunction) and (self.ast, self.window) == (other.ast, other.window)

    def __hash__(self):
        return hash((self.ast, self.window))

    def __repr__(self):
        return f"DslFunction({self.source!r}, window={self.window!r})"


def _unbounded(ast, edge: float, far: float) -> bool:
    try:
        return abs(ast_eval(ast, far) - ast_eval(ast, edge)) >= 1.0
    except DslEvalError:
        # overflow far out counts as unbounded growth
        return True


def validate_diffeo(ast_or_text, window: tuple[float, float], samples: int = 64) -> DslFunction:
    """Check ``f' > 0`` at Chebyshev points of ``window`` and its endpoints."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    source = ast_or_text if isinstance(ast_or_text, str) else to_source(ast_or_text)
    ast = parse(source) if isinstance(ast_or_text, str) else ast_or_text
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError(f"window must satisfy lo < hi, got [{lo}, {hi}]")
    points = [lo] + chebyshev_points(lo, hi, samples) + [hi]
    for x in points:
        try:
            d = ast_jet(ast, x, 1).derivs[1]
        except DslEvalError as exc:
            raise NotADiffeoError(f"{source}: {exc}", x) from None
        if not d > 0:
            raise NotADiffeoError(f"{source}: derivative {d!r} <= 0 at x = {x!r}", x)
    far = 1e6 * max(1.0, abs(lo), abs(hi))
    surjective = _unbounded(ast, hi, far) and _unbounded(ast, lo, -far)
    return DslFunction(source, (lo, hi), samples, surjective, ast)


def _decode_dsl(d):
    try:
        return validate_diffeo(d["source"], tuple(d["window"]), int(d.get("samples", 64)))
    except DslError as exc:
        raise ExprError(str(exc)) from None


register_kind("dsl", _decode_dsl)
