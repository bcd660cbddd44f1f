"""Truncated Taylor (jet) arithmetic.

A :class:`Jet` stores raw derivatives ``f(a), f'(a), ..., f^(N)(a)``.  Every
operation that needs series algebra (composition, reversion, elementary
functions) converts to Taylor coefficients ``f^(k)(a)/k!`` internally and
converts back on exit.

Values may be Python floats or ``mpmath.mpf``; nothing here coerces to float,
so the same code runs at extended precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath

BASE_POINT_TOL = 1e-12


class JetError(ValueError):
    """Invalid jet data or an operation outside its domain."""


def _finite(v) -> bool:
    if isinstance(v, mpmath.mpf):
        return bool(mpmath.isfinite(v))
    return math.isfinite(v)


@dataclass(frozen=True)
class Jet:
    """Derivatives of a function at ``base_point`` up to ``order``."""

    base_point: float
    derivs: tuple

    def __post_init__(self):
        derivs = tuple(self.derivs)
        if not derivs:
            raise JetError("a jet needs at least the value f(a)")
        for k, v in enumerate(derivs):
            if not _finite(v):
                raise JetError(f"derivative {k} is not finite: {v!r}")
        object.__setattr__(self, "derivs", derivs)

    @property
    def order(self) -> int:
        return len(self.derivs) - 1

    @property
    def value(self):
        return self.derivs[0]

    @property
    def slope(self):
        return self.derivs[1] if len(self.derivs) > 1 else None

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError(f"cannot truncate order {self.order} jet to {order}")
        return Jet(self.base_point, self.derivs[: order + 1])

    def padded(self, order: int) -> "Jet":
        """Extend with the identity tail rule: slope 1, higher derivatives 0."""
        if order <= self.order:
            return self.truncate(order)
        tail = []
        for n in range(self.order + 1, order + 1):
            tail.append(1.0 if n == 1 else 0.0)
        return Jet(self.base_point, self.derivs + tuple(tail))

    def is_identity(self) -> bool:
        """Exact comparison against the identity jet at the same base point."""
        return self.derivs == identity_jet(self.base_point, self.order).derivs

    def to_taylor(self) -> list:
        return [d / math.factorial(k) for k, d in enumerate(self.derivs)]

    @classmethod
    def from_taylor(cls, base_point, coeffs: Sequence) -> "Jet":
        return cls(base_point, tuple(c * math.factorial(k) for k, c in enumerate(coeffs)))

    def __repr__(self):
        vals = ", ".join(repr(float(d)) if isinstance(d, mpmath.mpf) else repr(d) for d in self.derivs)
        return f"Jet(base_point={self.base_point!r}, derivs=[{vals}])"


def identity_jet(a, order: int) -> Jet:
    if order < 0:
        raise JetError("order must be non-negative")
    derivs = [a]
    if order >= 1:
        derivs.append(1.0)
    derivs.extend([0.0] * (order - 1))
    return Jet(a, tuple(derivs))


def constant_jet(a, value, order: int) -> Jet:
    return Jet(a, (value,) + (0.0,) * order)


# -- truncated power series on Taylor coefficient lists -----------------------

def series_mul(p: Sequence, q: Sequence, n: int | None = None) -> list:
    if n is None:
        n = min(len(p), len(q))
    out = []
    for s in range(n):
        acc = p[0] * q[s]
        for k in range(1, s + 1):
            acc = acc + p[k] * q[s - k]
        out.append(acc)
    return out


def series_reciprocal(p: Sequence) -> list:
    if p[0] == 0:
        raise JetError("reciprocal of a series with zero constant term")
    n = len(p)
    out = [1 / p[0]]
    for s in range(1, n):
        acc = p[1] * out[s - 1]
        for k in range(2, s + 1):
            acc = acc + p[k] * out[s - k]
        out.append(-acc / p[0])
    return out


def series_compose(outer: Sequence, inner: Sequence) -> list:
    """Coefficients of ``outer(inner(t) - inner[0])``; Horner on truncated series."""
    n = min(len(outer), len(inner))
    shift = [0 * inner[0]] + list(inner[1:n])
    result = [outer[n - 1]] + [0 * outer[0]] * (n - 1)
    for k in range(n - 2, -1, -1):
        result = series_mul(result, shift, n)
        result[0] = result[0] + outer[k]
    return result


def series_derivative(p: Sequence) -> list:
    return [k * p[k] for k in range(1, len(p))]


def series_reversion(p: Sequence) -> list:
    """Compositional inverse of ``p - p[0]`` (needs ``p[1] != 0``).

    Newton's iteration ``G <- G - (P(G) - s) / P'(G)`` doubles the number of
    correct coefficients each step.  Returns coefficients with zero constant.
    """
    n = len(p)
    if n < 2:
        return [0 * p[0]]
    if p[1] == 0:
        raise JetError("series with zero linear term is not invertible")
    zero = 0 * p[0]
    target = [zero] * n
    target[1] = 1 + zero
    g = [zero] * n
    g[1] = 1 / p[1]
    shifted = [zero] + list(p[1:])
    dp = series_derivative(p) + [zero]
    prec = 2
    while prec < n:
        prec = min(2 * prec, n)
        gp = g[:prec]
        resid = series_compose(shifted[:prec], [zero] + gp[1:])
        resid = [r - t for r, t in zip(resid, target[:prec])]
        denom = series_compose(dp[:prec], [zero] + gp[1:])
        corr = series_mul(resid, series_reciprocal(denom), prec)
        g = [gi - ci for gi, ci in zip(gp, corr)] + [zero] * (n - prec)
    return g


# -- jet operations -----------------------------------------------------------

def _check_same_base(f: Jet, g: Jet):
    if abs(f.base_point - g.base_point) > BASE_POINT_TOL:
        raise JetError(f"base points differ: {f.base_point!r} vs {g.base_point!r}")


def jet_add(f: Jet, g: Jet) -> Jet:
    _check_same_base(f, g)
    n = min(f.order, g.order)
    return Jet(f.base_point, tuple(f.derivs[k] + g.derivs[k] for k in range(n + 1)))


def jet_sub(f: Jet, g: Jet) -> Jet:
    _check_same_base(f, g)
    n = min(f.order, g.order)
    return Jet(f.base_point, tuple(f.derivs[k] - g.derivs[k] for k in range(n + 1)))


def jet_scale(f: Jet, c) -> Jet:
    return Jet(f.base_point, tuple(c * d for d in f.derivs))


def jet_shift(f: Jet, c) -> Jet:
    return Jet(f.base_point, (f.derivs[0] + c,) + f.derivs[1:])


def jet_multiply(f: Jet, g: Jet) -> Jet:
    """Leibniz rule: ``(fg)^(s) = sum_k C(s,k) f^(k) g^(s-k)``."""
    _check_same_base(f, g)
    n = min(f.order, g.order)
    out = []
    for s in range(n + 1):
        acc = f.derivs[0] * g.derivs[s]
        for k in range(1, s + 1):
            acc = acc + math.comb(s, k) * f.derivs[k] * g.derivs[s - k]
        out.append(acc)
    return Jet(f.base_point, tuple(out))


def jet_reciprocal(f: Jet) -> Jet:
    if f.derivs[0] == 0:
        raise JetError(f"division by zero at x={f.base_point!r}")
    return Jet.from_taylor(f.base_point, series_reciprocal(f.to_taylor()))


def jet_divide(f: Jet, g: Jet) -> Jet:
    return jet_multiply(f, jet_reciprocal(g))


def jet_compose(outer: Jet, inner: Jet) -> Jet:
    """Jet of ``outer o inner`` at ``inner.base_point``.

    ``outer`` must be based at ``inner(a)`` (absolute tolerance 1e-12).
    """
    if abs(outer.base_point - inner.derivs[0]) > BASE_POINT_TOL:
        raise JetError(
            f"outer jet based at {outer.base_point!r}, inner value is {inner.derivs[0]!r}"
        )
    coeffs = series_compose(outer.to_taylor(), inner.to_taylor())
    return Jet.from_taylor(inner.base_point, coeffs)


def jet_invert(f: Jet) -> Jet:
    """Jet of ``f^-1`` at ``f(a)`` by truncated series reversion."""
    if f.order >= 1 and not f.derivs[1] > 0:
        raise JetError(f"jet is not invertible: f'(a) = {f.derivs[1]!r} <= 0")
    rev = series_reversion(f.to_taylor())
    rev[0] = rev[0] + f.base_point
    return Jet.from_taylor(f.derivs[0], rev)


def jet_pow(f: Jet, k: int) -> Jet:
    if k < 0:
        raise JetError("negative powers are not supported")
    result = constant_jet(f.base_point, 1 + 0 * f.derivs[0], f.order)
    base = f
    while k:
        if k & 1:
            result = jet_multiply(result, base)
        k >>= 1
        if k:
            base = jet_multiply(base, base)
    return result


# -- elementary functions (Taylor-mode recurrences) ---------------------------

def _lib(v):
    return mpmath if isinstance(v, mpmath.mpf) else math


def _integrate_product(a: Sequence, q: Sequence, c0) -> list:
    """Series b with b[0] = c0 and b' = a' * q."""
    n = len(a)
    da = series_derivative(a)
    prod = series_mul(da, q, n - 1) if n > 1 else []
    return [c0] + [prod[k - 1] / k for k in range(1, n)]


def series_exp(a: Sequence) -> list:
    n = len(a)
    b = [_lib(a[0]).exp(a[0])]
    for k in range(1, n):
        acc = 0 * a[0]
        for j in range(1, k + 1):
            acc = acc + j * a[j] * b[k - j]
        b.append(acc / k)
    return b


def series_tanh(a: Sequence) -> list:
    # t' = (1 - t^2) a'
    n = len(a)
    lib = _lib(a[0])
    t = [lib.tanh(a[0])]
    # sech^2 in a form that stays positive where tanh has rounded to +-1
    e2 = lib.exp(-2 * abs(a[0]))
    one_minus = [4 * e2 / (1 + e2) ** 2]
    for k in range(1, n):
        acc = 0 * a[0]
        for j in range(1, k + 1):
            acc = acc + j * a[j] * one_minus[k - j]
        t.append(acc / k)
        sq = 0 * a[0]
        for j in range(k + 1):
            sq = sq + t[j] * t[k - j]
        one_minus.append(-sq)
    return t


def series_sinh(a: Sequence) -> list:
    ep = series_exp(a)
    em = series_exp([-c for c in a])
    return [(p - m) / 2 for p, m in zip(ep, em)]


def series_atan(a: Sequence) -> list:
    # atan' = a' / (1 + a^2)
    sq = series_mul(a, a)
    sq[0] = 1 + sq[0]
    return _integrate_product(a, series_reciprocal(sq), _lib(a[0]).atan(a[0]))


def _elementary(series_fn):
    def apply(f: Jet) -> Jet:
        return Jet.from_taylor(f.base_point, series_fn(f.to_taylor()))

    apply.__name__ = series_fn.__name__.replace("series_", "jet_")
    return apply


jet_exp = _elementary(series_exp)
jet_tanh = _elementary(series_tanh)
jet_sinh = _elementary(series_sinh)
jet_atan = _elementary(series_atan)


def compose_magnitude(outer: Jet, inner: Jet) -> Jet:
    """Jet of ``|outer| o |inner|`` (absolute Taylor coefficients).

    Rounding error in :func:`jet_compose` is bounded by a small multiple of
    machine epsilon times this jet, so it is the natural scale for judging a
    composed jet that should cancel to something small.
    """
    a = [abs(c) for c in outer.to_taylor()]
    b = [0 * inner.derivs[0]] + [abs(c) for c in inner.to_taylor()[1:]]
    return Jet.from_taylor(inner.base_point, series_compose(a, b))


def compose_error(got: Jet, want: Jet, outer: Jet, inner: Jet) -> float:
    """``max_k |got_k - want_k| / max(1, |outer| o |inner|_k)``."""
    mag = compose_magnitude(outer, inner)
    n = min(got.order, want.order, mag.order)
    return max(float(abs(got.derivs[k] - want.derivs[k]) / max(1.0, mag.derivs[k])) for k in range(n + 1))


def jets_close(f: Jet, g: Jet, rtol: float, floor: float = 1.0) -> bool:
    """Componentwise ``|f_k - g_k| <= rtol * max(floor, |g_k|)``."""
    if f.order != g.order:
        return False
    return all(abs(a - b) <= rtol * max(floor, abs(b)) for a, b in zip(f.derivs, g.derivs))


def max_rel_error(f: Jet, g: Jet, floor: float = 1.0) -> float:
    n = min(f.order, g.order)
    return max(
        float(abs(f.derivs[k] - g.derivs[k]) / max(floor, abs(g.derivs[k]))) for k in range(n + 1)
    )
