"""Immutable closed-form expression trees.

Every node supports exact evaluation (``eval``), exact jets of any order
(``jet``) and, when flagged increasing, pointwise inversion
(``inverse_eval``).  Inputs may be floats or ``mpmath.mpf``; the arithmetic
follows the type of the argument so the same tree can be sampled at extended
precision.

Monotonicity and range flags are set by the constructions that build the
trees (they are trusted inputs to :class:`InverseOf`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from . import bump_calculus as bc
from .jet_core import (
    Jet,
    constant_jet,
    identity_jet,
    jet_add,
    jet_compose,
    jet_invert,
    jet_multiply,
    jet_scale,
    jet_sub,
)

INF = math.inf
FULL_RANGE = (-INF, INF)

NEWTON_STEPS = 5
BISECT_WIDTH = 1e-8
INVERSE_RTOL = 1e-13


class ExprError(ValueError):
    """Malformed expression or evaluation outside the domain."""


class InversionError(ExprError):
    """Inversion target outside the range, or the expression is not increasing."""


def _is_mp(v) -> bool:
    return isinstance(v, mpmath.mpf)


def _range_contains(rng, y) -> bool:
    lo, hi = rng
    return lo < y < hi or (lo == hi == y)


class SmoothExpr:
    """Base class; subclasses are frozen dataclasses."""

    kind: str = ""

    # flags -- overridden per node
    @property
    def monotone(self) -> int:
        return 0

    @property
    def range(self) -> tuple:
        return FULL_RANGE

    @property
    def is_increasing(self) -> bool:
        return self.monotone == 1

    def eval(self, x):
        raise NotImplementedError

    def jet(self, x, order: int) -> Jet:
        raise NotImplementedError

    def inverse_eval(self, y):
        return bracketed_inverse(self, y)

    def children(self) -> tuple:
        return ()

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __call__(self, x):
        return self.eval(x)


def _flags_dict(expr) -> dict:
    lo, hi = expr.range
    return {
        "monotone": expr.monotone,
        "range": [None if math.isinf(lo) else lo, None if math.isinf(hi) else hi],
    }


def _range_from(data) -> tuple:
    lo, hi = data
    return (-INF if lo is None else float(lo), INF if hi is None else float(hi))


# -- leaves -------------------------------------------------------------------

@dataclass(frozen=True)
class Identity(SmoothExpr):
    kind = "identity"

    @property
    def monotone(self):
        return 1

    def eval(self, x):
        return x

    def jet(self, x, order):
        return identity_jet(x, order)

    def inverse_eval(self, y):
        return y

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Const(SmoothExpr):
    c: float
    kind = "const"

    @property
    def range(self):
        return (self.c, self.c)

    def eval(self, x):
        return self.c + 0 * x

    def jet(self, x, order):
        return constant_jet(x, self.c + 0 * x, order)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class Affine(SmoothExpr):
    """``a + b x``."""

    a: float
    b: float
    kind = "affine"

    @property
    def monotone(self):
        return (self.b > 0) - (self.b < 0)

    @property
    def range(self):
        return FULL_RANGE if self.b != 0 else (self.a, self.a)

    def eval(self, x):
        return self.a + self.b * x

    def jet(self, x, order):
        derivs = [self.eval(x)]
        if order >= 1:
            derivs.append(self.b + 0 * x)
        derivs.extend([0 * x] * (order - 1))
        return Jet(x, tuple(derivs))

    def inverse_eval(self, y):
        if self.b <= 0:
            raise InversionError("affine map is not increasing")
        return (y - self.a) / self.b

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}


def _pin_value(j: Jet, v) -> Jet:
    # the value slot must agree bit-for-bit with eval; jet products round differently
    return Jet(j.base_point, (v,) + j.derivs[1:])


def _monomial_jet(x, n: int, order: int) -> Jet:
    """Jet of ``x^n / n!``."""
    derivs = []
    for k in range(order + 1):
        if k > n:
            derivs.append(0 * x)
        else:
            derivs.append(x ** (n - k) / math.factorial(n - k))
    return Jet(x, tuple(derivs))


@dataclass(frozen=True)
class MonomialBump(SmoothExpr):
    """``(b / n!) x^n gamma(c x)``; identically 0 for ``|x| >= 1/c``."""

    b: float
    n: int
    c: float
    kind = "monomial_bump"

    def __post_init__(self):
        if not self.c > 0:
            raise ExprError(f"bump scale must be positive, got {self.c!r}")
        if self.n < 0:
            raise ExprError("monomial degree must be non-negative")

    def in_support(self, x) -> bool:
        return abs(x) * self.c < 1 and abs(x) < 1 / self.c

    def eval(self, x):
        if not self.in_support(x):
            return 0 * x
        return self.b / math.factorial(self.n) * x**self.n * bc.gamma_eval(self.c * x)

    def jet(self, x, order):
        if not self.in_support(x):
            return constant_jet(x, 0 * x, order)
        mono = _monomial_jet(x, self.n, order)
        gj = bc.gamma_jet(self.c * x, order)
        cut = Jet(x, tuple(d * self.c**k for k, d in enumerate(gj.derivs)))
        return _pin_value(jet_scale(jet_multiply(mono, cut), self.b), self.eval(x))

    def to_dict(self):
        return {"kind": self.kind, "b": self.b, "n": self.n, "c": self.c}


@dataclass(frozen=True)
class ScaledBeta(SmoothExpr):
    """``v0 + (v1 - v0) beta(x)``, range ``((2 v0 + v1)/3, (v0 + v1)/2)``."""

    v0: float
    v1: float
    kind = "scaled_beta"

    @property
    def monotone(self):
        return (self.v1 > self.v0) - (self.v1 < self.v0)

    @property
    def range(self):
        lo = self.v0 + (self.v1 - self.v0) / 3
        hi = (self.v0 + self.v1) / 2
        return (min(lo, hi), max(lo, hi))

    def eval(self, x):
        mid = (self.v0 + self.v1) / 2
        # beta = 1/2 - 1/(6 (1 + e^{2x})); keeps values strictly below mid
        lib = mpmath if _is_mp(x) else math
        if x > 400:
            return mid + 0 * x
        return mid - (self.v1 - self.v0) / (6 * (1 + lib.exp(2 * x)))

    def jet(self, x, order):
        bj = bc.beta_jet(x, order)
        span = self.v1 - self.v0
        return Jet(x, (self.eval(x),) + tuple(span * d for d in bj.derivs[1:]))

    def to_dict(self):
        return {"kind": self.kind, "v0": self.v0, "v1": self.v1}


# -- composite nodes ----------------------------------------------------------

@dataclass(frozen=True)
class Sum(SmoothExpr):
    terms: tuple
    flags: tuple | None = field(default=None, compare=False)
    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ExprError("empty sum")

    @property
    def monotone(self):
        if self.flags is not None:
            return self.flags[0]
        signs = {t.monotone for t in self.terms if not isinstance(t, Const)}
        return signs.pop() if len(signs) == 1 else 0

    @property
    def range(self):
        if self.flags is not None:
            return self.flags[1]
        return FULL_RANGE

    def active_terms(self, x) -> tuple:
        """Terms that can be non-zero at ``x`` (bumps outside their support drop out)."""
        return tuple(t for t in self.terms if not (isinstance(t, MonomialBump) and not t.in_support(x)))

    def eval(self, x):
        it = iter(self.terms)
        acc = next(it).eval(x)
        for t in it:
            acc = acc + t.eval(x)
        return acc

    def jet(self, x, order):
        it = iter(self.terms)
        acc = next(it).jet(x, order)
        for t in it:
            acc = jet_add(acc, t.jet(x, order))
        return acc

    def children(self):
        return self.terms

    def to_dict(self):
        d = {"kind": self.kind, "terms": [t.to_dict() for t in self.terms]}
        if self.flags is not None:
            d["flags"] = _flags_dict(self)
        return d


@dataclass(frozen=True)
class Glue(SmoothExpr):
    """``(1 - a) left + a right`` with ``a(x) = alpha((x - t0)/(t1 - t0))``.

    Exactly ``left`` for ``x <= t0 + (t1 - t0)/3`` and exactly ``right`` for
    ``x >= t0 + 2(t1 - t0)/3``.
    """

    t0: float
    t1: float
    left: SmoothExpr
    right: SmoothExpr
    increasing: bool = field(default=False, compare=False)
    kind = "glue"

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise ExprError(f"glue window needs t0 < t1, got [{self.t0!r}, {self.t1!r}]")

    @property
    def monotone(self):
        return 1 if self.increasing else 0

    @property
    def range(self):
        if self.increasing:
            return (self.left.range[0], self.right.range[1])
        return FULL_RANGE

    def _step_arg(self, x):
        lo, hi = bc.ALPHA_FLATS
        u = (x - self.t0) / (self.t1 - self.t0)
        return (u - lo) / (hi - lo)

    def eval(self, x):
        v = self._step_arg(x)
        if v <= 0:
            return self.left.eval(x)
        if v >= 1:
            return self.right.eval(x)
        a = bc.smooth_step(v)
        return (1 - a) * self.left.eval(x) + a * self.right.eval(x)

    def blend_jet(self, x, order) -> Jet:
        lo, hi = bc.ALPHA_FLATS
        scale = 1 / ((self.t1 - self.t0) * (hi - lo))
        sj = bc.smooth_step_jet(self._step_arg(x), order)
        return Jet(x, tuple(d * scale**k for k, d in enumerate(sj.derivs)))

    def jet(self, x, order):
        v = self._step_arg(x)
        if v <= 0:
            return self.left.jet(x, order)
        if v >= 1:
            return self.right.jet(x, order)
        a = self.blend_jet(x, order)
        lj = self.left.jet(x, order)
        rj = self.right.jet(x, order)
        return _pin_value(jet_add(lj, jet_multiply(a, jet_sub(rj, lj))), self.eval(x))

    def inverse_eval(self, y):
        if not self.increasing:
            return bracketed_inverse(self, y)
        lo, hi = bc.ALPHA_FLATS
        xa = self.t0 + lo * (self.t1 - self.t0)
        xb = self.t0 + hi * (self.t1 - self.t0)
        # on the flats the blend is one of the branches, which invert structurally
        if y <= self.left.eval(xa):
            return self.left.inverse_eval(y)
        if y >= self.right.eval(xb):
            return self.right.inverse_eval(y)
        return bracketed_inverse(self, y, xa, xb)

    def children(self):
        return (self.left, self.right)

    def to_dict(self):
        return {
            "kind": self.kind,
            "t0": self.t0,
            "t1": self.t1,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
            "increasing": self.increasing,
        }


@dataclass(frozen=True)
class AffinePre(SmoothExpr):
    """``f(a + c x)``."""

    f: SmoothExpr
    a: float
    c: float
    kind = "affine_pre"

    def __post_init__(self):
        if self.c == 0:
            raise ExprError("affine precomposition needs c != 0")

    @property
    def monotone(self):
        return self.f.monotone * (1 if self.c > 0 else -1)

    @property
    def range(self):
        return self.f.range

    def eval(self, x):
        return self.f.eval(self.a + self.c * x)

    def jet(self, x, order):
        inner = self.f.jet(self.a + self.c * x, order)
        return Jet(x, tuple(d * self.c**k for k, d in enumerate(inner.derivs)))

    def inverse_eval(self, y):
        if self.f.monotone == 0:
            return bracketed_inverse(self, y)
        return (preimage(self.f, y) - self.a) / self.c

    def children(self):
        return (self.f,)

    def to_dict(self):
        return {"kind": self.kind, "f": self.f.to_dict(), "a": self.a, "c": self.c}


@dataclass(frozen=True)
class Compose(SmoothExpr):
    """``f o g``."""

    f: SmoothExpr
    g: SmoothExpr
    kind = "compose"

    @property
    def monotone(self):
        return self.f.monotone * self.g.monotone

    @property
    def range(self):
        glo, ghi = self.g.range
        if self.f.monotone == 0:
            return FULL_RANGE
        if (glo, ghi) == FULL_RANGE:
            return self.f.range
        ends = [_image(self.f, glo, low=True), _image(self.f, ghi, low=False)]
        return (min(ends), max(ends))

    def eval(self, x):
        return self.f.eval(self.g.eval(x))

    def jet(self, x, order):
        gj = self.g.jet(x, order)
        return jet_compose(self.f.jet(gj.derivs[0], order), gj)

    def inverse_eval(self, y):
        if self.f.monotone != 0 and self.g.monotone != 0:
            return preimage(self.g, preimage(self.f, y))
        return bracketed_inverse(self, y)

    def children(self):
        return (self.f, self.g)

    def to_dict(self):
        return {"kind": self.kind, "f": self.f.to_dict(), "g": self.g.to_dict()}


def _image(f, t, low):
    if math.isinf(t):
        lo, hi = f.range
        increasing = f.monotone > 0
        if (t < 0) == increasing:
            return lo
        return hi
    return f.eval(t)


@dataclass(frozen=True)
class InverseOf(SmoothExpr):
    f: SmoothExpr
    kind = "inverse_of"

    def __post_init__(self):
        if not self.f.is_increasing:
            raise ExprError(f"InverseOf needs an increasing expression, got {self.f.kind}")

    @property
    def monotone(self):
        return 1

    @property
    def range(self):
        # the domain of f, which is always the whole line here
        return FULL_RANGE

    def eval(self, x):
        return self.f.inverse_eval(x)

    def jet(self, x, order):
        pre = self.f.inverse_eval(x)
        inv = jet_invert(self.f.jet(pre, order))
        return Jet(x, inv.derivs)

    def inverse_eval(self, y):
        return self.f.eval(y)

    def children(self):
        return (self.f,)

    def to_dict(self):
        return {"kind": self.kind, "f": self.f.to_dict()}


# -- inversion ----------------------------------------------------------------

def preimage(e: SmoothExpr, y):
    """Solve ``e(x) = y`` for a strictly monotone ``e`` of either orientation."""
    if e.monotone > 0:
        return e.inverse_eval(y)
    if isinstance(e, Affine) and e.b != 0:
        return (y - e.a) / e.b
    if isinstance(e, AffinePre) and e.f.monotone != 0:
        return (preimage(e.f, y) - e.a) / e.c
    if isinstance(e, Compose) and e.f.monotone != 0 and e.g.monotone != 0:
        return preimage(e.g, preimage(e.f, y))
    raise InversionError(f"no structural inverse for {e.kind} with monotone = {e.monotone}")


def bracketed_inverse(e: SmoothExpr, y, lo=None, hi=None):
    """Solve ``e(x) = y`` for an increasing expression.

    Geometric bracket expansion from 0 (unless a bracket is given), bisection to
    width 1e-8, then at most 5 Newton steps kept inside the bracket; if Newton
    stalls or escapes, bisection continues down to adjacent floats.  ``mpf``
    targets are refined at the working precision after a float pass.
    """
    if not e.is_increasing:
        raise InversionError(f"cannot invert non-increasing expression ({e.kind})")
    if not _range_contains(e.range, y):
        raise InversionError(f"value {float(y)!r} outside range {e.range!r}")
    if _is_mp(y):
        return _mp_inverse(e, y, lo, hi)
    y = float(y)
    if lo is None or hi is None:
        lo, hi = _expand_bracket(e, y)
    lo, hi = float(lo), float(hi)
    flo, fhi = e.eval(lo), e.eval(hi)
    if flo == y:
        return lo
    if fhi == y:
        return hi
    if not flo < y < fhi:
        raise InversionError(f"bracket [{lo!r}, {hi!r}] does not enclose {y!r}")
    while hi - lo > BISECT_WIDTH * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        fm = e.eval(mid)
        if fm == y:
            return mid
        if fm < y:
            lo = mid
        else:
            hi = mid
    tol = INVERSE_RTOL * max(1.0, abs(y))
    x = 0.5 * (lo + hi)
    for _ in range(NEWTON_STEPS):
        j = e.jet(x, 1)
        r = j.derivs[0] - y
        if abs(r) <= tol:
            return x
        if r < 0:
            lo = x
        else:
            hi = x
        d = j.derivs[1]
        if not d > 0:
            break
        nx = x - r / d
        if not lo <= nx <= hi:
            break
        x = nx
    best = x
    best_r = abs(e.eval(x) - y)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = e.eval(mid)
        r = abs(fm - y)
        if r < best_r:
            best, best_r = mid, r
        if fm == y:
            return mid
        if fm < y:
            lo = mid
        else:
            hi = mid
    for cand in (lo, hi):
        r = abs(e.eval(cand) - y)
        if r < best_r:
            best, best_r = cand, r
    return best


def _expand_bracket(e, y):
    f0 = e.eval(0.0)
    if f0 == y:
        return 0.0, 0.0
    step = 1.0
    if f0 < y:
        lo = 0.0
        while True:
            hi = step
            if e.eval(hi) >= y:
                return lo, hi
            lo = hi
            step *= 2
            if step > 1e300:
                raise InversionError(f"no bracket found for {y!r}")
    hi = 0.0
    while True:
        lo = -step
        if e.eval(lo) <= y:
            return lo, hi
        hi = lo
        step *= 2
        if step > 1e300:
            raise InversionError(f"no bracket found for {y!r}")


def _mp_inverse(e, y, lo=None, hi=None):
    x0 = bracketed_inverse(e, float(y), lo if lo is None else float(lo), hi if hi is None else float(hi))
    x = mpmath.mpf(x0)
    eps = mpmath.mpf(2) ** (-mpmath.mp.prec + 8)
    # widen a float-accurate bracket until it encloses y at working precision
    w = mpmath.mpf(4e-16) * max(1, abs(x))
    a, b = x - w, x + w
    while e.eval(a) > y:
        a -= w
        w *= 2
    w = mpmath.mpf(4e-16) * max(1, abs(x))
    while e.eval(b) < y:
        b += w
        w *= 2
    for _ in range(60):
        j = e.jet(x, 1)
        r = j.derivs[0] - y
        if r == 0:
            return x
        if r < 0:
            a = x
        else:
            b = x
        d = j.derivs[1]
        nx = x - r / d if d > 0 else (a + b) / 2
        if not a < nx < b:
            nx = (a + b) / 2
        if abs(nx - x) <= eps * max(1, abs(x)):
            return nx
        x = nx
    return x


# -- module-level API ---------------------------------------------------------

def expr_eval(e: SmoothExpr, x):
    return e.eval(x)


def expr_jet(e: SmoothExpr, x, order: int) -> Jet:
    if order < 0:
        raise ExprError("order must be non-negative")
    return e.jet(x, order)


def expr_inverse_eval(e: SmoothExpr, y):
    if not e.is_increasing:
        raise InversionError(f"cannot invert non-increasing expression ({e.kind})")
    return e.inverse_eval(y)


def glue(f: SmoothExpr, g: SmoothExpr, t0: float, t1: float, *, ordered: bool | None = None) -> Glue:
    """Blend ``f`` into ``g`` across ``[t0, t1]``.

    The result is flagged increasing when both inputs are increasing and
    ``f <= g`` on the window; pass ``ordered`` to assert the ordering instead
    of sampling it.
    """
    if not t0 < t1:
        raise ExprError(f"glue window needs t0 < t1, got [{t0!r}, {t1!r}]")
    increasing = False
    if f.is_increasing and g.is_increasing:
        if ordered is None:
            xs = np.linspace(t0, t1, 257)
            ordered = all(f.eval(float(x)) <= g.eval(float(x)) for x in xs)
        increasing = bool(ordered)
    return Glue(t0, t1, f, g, increasing)


def reflect(e: SmoothExpr) -> SmoothExpr:
    """``x -> -e(1 - x)``; maps increasing expressions to increasing ones."""
    return Compose(Affine(0.0, -1.0), AffinePre(e, 1.0, -1.0))


def walk(e: SmoothExpr):
    yield e
    for ch in e.children():
        yield from walk(ch)


# -- serialization ------------------------------------------------------------

_DECODERS: dict[str, Callable[[dict], SmoothExpr]] = {}


def register_kind(kind: str, decoder: Callable[[dict], SmoothExpr]):
    _DECODERS[kind] = decoder


def from_dict(d: dict) -> SmoothExpr:
    try:
        kind = d["kind"]
    except (TypeError, KeyError):
        raise ExprError(f"expression node without a kind: {d!r}") from None
    if kind not in _DECODERS:
        raise ExprError(f"unknown expression kind {kind!r}")
    try:
        return _DECODERS[kind](d)
    except KeyError as exc:
        raise ExprError(f"{kind} node missing field {exc}") from None


def _num(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ExprError(f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ExprError(f"non-finite number {v!r}")
    return v


def _decode_sum(d):
    flags = None
    if "flags" in d:
        flags = (int(d["flags"]["monotone"]), _range_from(d["flags"]["range"]))
    return Sum(tuple(from_dict(t) for t in d["terms"]), flags)


register_kind("identity", lambda d: Identity())
register_kind("const", lambda d: Const(_num(d["c"])))
register_kind("affine", lambda d: Affine(_num(d["a"]), _num(d["b"])))
register_kind("monomial_bump", lambda d: MonomialBump(_num(d["b"]), int(d["n"]), _num(d["c"])))
register_kind("scaled_beta", lambda d: ScaledBeta(_num(d["v0"]), _num(d["v1"])))
register_kind("sum", _decode_sum)
register_kind(
    "glue",
    lambda d: Glue(
        _num(d["t0"]), _num(d["t1"]), from_dict(d["left"]), from_dict(d["right"]), bool(d.get("increasing", False))
    ),
)
register_kind("affine_pre", lambda d: AffinePre(from_dict(d["f"]), _num(d["a"]), _num(d["c"])))
register_kind("compose", lambda d: Compose(from_dict(d["f"]), from_dict(d["g"])))
register_kind("inverse_of", lambda d: InverseOf(from_dict(d["f"])))


def to_json(e: SmoothExpr, **kw) -> str:
    return json.dumps(e.to_dict(), allow_nan=False, **kw)


def from_json(text: str) -> SmoothExpr:
    return from_dict(json.loads(text))
