"""Fixed smooth auxiliary functions and their derivatives.

Everything is built from the flat kernel ``e(x) = exp(-1/x)`` (``x > 0``):

* ``sigma(t) = e(t) / (e(t) + e(1 - t))`` -- smooth step, 0 for t<=0, 1 for t>=1
* ``gamma(x) = sigma(2 - 2|x|)``           -- plateau bump, 1 on |x|<=1/2, 0 on |x|>=1
* ``alpha(x) = sigma(3x - 1)``             -- monotone step, flats on x<=1/3, x>=2/3
* ``beta(x) = 1/3 + (1 + tanh x) / 12``    -- increasing, range (1/3, 1/2)

The ``*_jet`` variants return exact derivative jets; the flat regions return
exact constants so downstream code can rely on bit-level equality there.
"""

from __future__ import annotations

import math
import threading

import mpmath
import numpy as np

from .jet_core import Jet, constant_jet, identity_jet, jet_divide, jet_tanh, series_mul

# Lower/upper flats of alpha, as fractions of the transition window.
ALPHA_FLATS = [1.0 / 3.0, 2.0 / 3.0]

NORM_GRID_STEP = 1e-5


def _lib(v):
    return mpmath if isinstance(v, mpmath.mpf) else math


class FlatExpKernel:
    """``e(x) = exp(-1/x)`` for x > 0 and 0 otherwise, with all derivatives.

    ``e^(k)(x) = p_k(1/x) e(x)`` where ``p_0 = 1`` and
    ``p_{k+1}(t) = t^2 (p_k(t) - p_k'(t))``; the integer coefficient lists are
    cached (lowest degree first).
    """

    def __init__(self):
        self._polys = [[1]]
        self._lock = threading.Lock()

    def poly(self, k: int) -> list:
        if k >= len(self._polys):
            with self._lock:
                while len(self._polys) <= k:
                    p = self._polys[-1]
                    dp = [i * p[i] for i in range(1, len(p))] + [0]
                    diff = [a - b for a, b in zip(p, dp)]
                    self._polys.append([0, 0] + diff)
        return self._polys[k]

    def value(self, x):
        if x <= 0:
            return 0 * x
        return _lib(x).exp(-1 / x)

    def derivs(self, x, order: int) -> list:
        """``[e(x), e'(x), ..., e^(order)(x)]``."""
        zero = 0 * x
        if x <= 0:
            return [zero] * (order + 1)
        ex = _lib(x).exp(-1 / x)
        if ex == 0:
            # p_k(1/x) may overflow where e(x) has already underflowed.
            return [zero] * (order + 1)
        t = 1 / x
        out = []
        for k in range(order + 1):
            acc = zero
            for c in reversed(self.poly(k)):
                acc = acc * t + c
            out.append(acc * ex)
        return out

    def derivs_array(self, x: np.ndarray, order: int) -> list:
        """Vectorized :meth:`derivs` for ``x > 0``."""
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            t = 1.0 / x
            ex = np.exp(-t)
            out = []
            for k in range(order + 1):
                acc = np.zeros_like(x)
                for c in reversed(self.poly(k)):
                    acc = acc * t + float(c)
                out.append(np.where(ex > 0, acc * ex, 0.0))
        return out


KERNEL = FlatExpKernel()


def smooth_step(t):
    if t <= 0:
        return 0 * t
    if t >= 1:
        return 1 + 0 * t
    a = KERNEL.value(t)
    b = KERNEL.value(1 - t)
    return a / (a + b)


def smooth_step_jet(t, order: int) -> Jet:
    if t <= 0:
        return constant_jet(t, 0 * t, order)
    if t >= 1:
        return constant_jet(t, 1 + 0 * t, order)
    num = KERNEL.derivs(t, order)
    refl = KERNEL.derivs(1 - t, order)
    den = [a + (-1) ** k * b for k, (a, b) in enumerate(zip(num, refl))]
    return jet_divide(Jet(t, tuple(num)), Jet(t, tuple(den)))


def _chain_affine(j: Jet, x, slope) -> Jet:
    # derivatives of u(slope*x + const) given the jet of u at the inner point
    return Jet(x, tuple(d * slope**k for k, d in enumerate(j.derivs)))


def gamma_eval(x):
    ax = abs(x)
    if ax <= 0.5:
        return 1 + 0 * x
    if ax >= 1:
        return 0 * x
    return smooth_step(2 - 2 * ax)


def gamma_jet(x, order: int) -> Jet:
    ax = abs(x)
    if ax <= 0.5:
        return constant_jet(x, 1 + 0 * x, order)
    if ax >= 1:
        return constant_jet(x, 0 * x, order)
    inner = smooth_step_jet(2 - 2 * ax, order)
    return _chain_affine(inner, x, -2 if x > 0 else 2)


def _alpha_arg(x):
    lo, hi = ALPHA_FLATS
    return (x - lo) / (hi - lo), 1 / (hi - lo)


def alpha_eval(x):
    u, _ = _alpha_arg(x)
    return smooth_step(u)


def alpha_jet(x, order: int) -> Jet:
    u, scale = _alpha_arg(x)
    return _chain_affine(smooth_step_jet(u, order), x, scale)


def beta_eval(x):
    # 1/3 + (1 + tanh x)/12 written as 1/2 - 1/(6 (1 + e^{2x})) so that the
    # supremum 1/2 is approached from below without rounding past it.
    lib = _lib(x)
    if x > 400:
        return 0.5 + 0 * x
    return 0.5 - 1 / (6 * (1 + lib.exp(2 * x)))


def beta_jet(x, order: int) -> Jet:
    th = jet_tanh(identity_jet(x, order))
    derivs = [beta_eval(x)] + [d / 12 for d in th.derivs[1:]]
    return Jet(x, tuple(derivs))


# -- certified norm bounds ----------------------------------------------------

def _gamma_derivs_on_grid(x: np.ndarray, order: int) -> list:
    """``gamma^(k)`` for k <= order on points of (1/2, 1)."""
    t = 2.0 - 2.0 * x
    num = KERNEL.derivs_array(t, order)
    refl = KERNEL.derivs_array(1.0 - t, order)
    den = [a + (-1) ** k * b for k, (a, b) in enumerate(zip(num, refl))]
    # quotient of truncated series with array coefficients
    ntay = [num[k] / math.factorial(k) for k in range(order + 1)]
    dtay = [den[k] / math.factorial(k) for k in range(order + 1)]
    inv = [1.0 / dtay[0]]
    for s in range(1, order + 1):
        acc = dtay[1] * inv[s - 1]
        for k in range(2, s + 1):
            acc = acc + dtay[k] * inv[s - k]
        inv.append(-acc / dtay[0])
    q = series_mul(ntay, inv, order + 1)
    return [q[k] * math.factorial(k) * (-2.0) ** k for k in range(order + 1)]


class NormTable:
    """Certified upper bounds ``B(s) >= ||gamma||_s``.

    ``B(s) = max_{k<=s} (grid max |gamma^(k)| + h * M_{k+1})`` with ``M_{k+1}``
    twice a coarse-grid estimate of ``sup |gamma^(k+1)|``, then a running max.
    ``B(0) = 1`` exactly because gamma takes values in [0, 1] and attains 1.
    """

    def __init__(self, step: float = NORM_GRID_STEP):
        self.step = step
        self._bounds: list[float] = []
        self._grid_max: list[float] = []
        self._lock = threading.Lock()

    def _extend(self, s: int):
        order = s + 1
        n = int(round(0.5 / self.step))
        x = 0.5 + self.step * np.arange(n + 1)
        fine = _gamma_derivs_on_grid(x, order)
        coarse_x = 0.5 + 10 * self.step * np.arange(n // 10 + 1)
        coarse = _gamma_derivs_on_grid(coarse_x, order)
        grid_max = [float(np.max(np.abs(d))) for d in fine]
        sup_est = [2.0 * float(np.max(np.abs(d))) for d in coarse]
        bounds = []
        running = 1.0
        for k in range(s + 1):
            if k == 0:
                b = 1.0
            else:
                b = grid_max[k] + self.step * sup_est[k + 1]
            running = max(running, b)
            bounds.append(running)
        self._grid_max = grid_max
        self._bounds = bounds

    def bound(self, s: int) -> float:
        if s < 0:
            raise ValueError("norm index must be non-negative")
        if s >= len(self._bounds):
            with self._lock:
                if s >= len(self._bounds):
                    self._extend(max(s, 8))
        return self._bounds[s]


NORM_TABLE = NormTable()


def gamma_norm_bound(s: int) -> float:
    return NORM_TABLE.bound(s)
