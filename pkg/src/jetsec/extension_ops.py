"""Extension operators: jets at points of the line -> increasing diffeomorphisms.

* :func:`extend_point`     -- singleton {0}: series of cut-off monomials
* :func:`extend_left`      -- doubleton {0, 1}, left half (range below the midpoint)
* :func:`extend_right`     -- mirror of :func:`extend_left` by reflection
* :func:`extend_unit_pair` -- doubleton {0, 1}, glued halves
* :func:`extend_pair`      -- doubleton {a, a + c}, normalized so identity jets give Identity
* :func:`extend_integers`  -- all of Z, assembled interval by interval
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

import mpmath

from . import bump_calculus as bc
from .jet_core import Jet, JetError, identity_jet
from .smooth_expr import (
    FULL_RANGE,
    Affine,
    AffinePre,
    Compose,
    ExprError,
    Identity,
    InverseOf,
    InversionError,
    MonomialBump,
    ScaledBeta,
    SmoothExpr,
    Sum,
    bracketed_inverse,
    from_dict,
    glue,
    reflect,
    register_kind,
)


class FamilyError(ValueError):
    """A jet family violates the admissibility conditions."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


# Multipliers applied to constructed constants; only the mutation tests touch these.
_TAMPER = {"c_n": 1.0, "glue_window": 1.0, "lambda": 1.0}
TAMPER_TARGETS = ("c_n", "glue_window", "alpha_flat", "lambda")


@contextlib.contextmanager
def tampered(target: str, factor: float):
    """Temporarily corrupt one constructed constant by ``factor``."""
    if target not in TAMPER_TARGETS:
        raise ValueError(f"unknown tamper target {target!r}")
    if target == "alpha_flat":
        saved = list(bc.ALPHA_FLATS)
        bc.ALPHA_FLATS[0] *= factor
        try:
            yield
        finally:
            bc.ALPHA_FLATS[:] = saved
        return
    saved = _TAMPER[target]
    _TAMPER[target] = saved * factor
    try:
        yield
    finally:
        _TAMPER[target] = saved


def series_scale(fn: float, f1: float, n: int) -> float:
    """``c_n = n 4^n |f^n| / f^1 * B(n) + 3``."""
    return n * 4.0**n * abs(fn) / f1 * bc.gamma_norm_bound(n) + 3.0


def _check_slope(j: Jet, where: str):
    if j.order < 1 or not j.derivs[1] > 0:
        slope = j.derivs[1] if j.order >= 1 else None
        raise JetError(f"{where}: slope must be positive, got {slope!r}")


def extend_point(j: Jet) -> SmoothExpr:
    """Increasing diffeomorphism with jet ``j`` at 0, affine for ``|x| >= 1/3``."""
    if j.base_point != 0:
        raise JetError(f"extend_point expects a jet at 0, got base point {j.base_point!r}")
    _check_slope(j, "extend_point")
    f0, f1 = j.derivs[0], j.derivs[1]
    line = Affine(f0, f1)
    bumps = []
    for n in range(2, j.order + 1):
        fn = j.derivs[n]
        if fn != 0:
            bumps.append(MonomialBump(fn, n, series_scale(fn, f1, n) * _TAMPER["c_n"]))
    if not bumps:
        return line
    return Sum((line, *bumps), flags=(1, FULL_RANGE))


def _pair_checks(j0: Jet, j1: Jet):
    _check_slope(j0, "left jet")
    _check_slope(j1, "right jet")
    if not j0.derivs[0] < j1.derivs[0]:
        raise JetError(f"values must increase: f0_0 = {j0.derivs[0]!r}, f0_1 = {j1.derivs[0]!r}")


def left_window(j0: Jet, j1: Jet, e1: SmoothExpr | None = None) -> float:
    """The blend width ``c_f``: where the point extension reaches 2/3 f0_0 + 1/3 f0_1."""
    if e1 is None:
        e1 = extend_point(j0)
    return e1.inverse_eval((2 * j0.derivs[0] + j1.derivs[0]) / 3)


def extend_left(j0: Jet, j1: Jet) -> SmoothExpr:
    """Jet ``j0`` at 0 and range ``(-inf, (f0_0 + f0_1)/2)``.

    The point extension of ``j0`` is blended into ``f0_0 + (f0_1 - f0_0) beta``
    over ``[0, c_f]``.
    """
    _pair_checks(j0, j1)
    e1 = extend_point(j0)
    cf = left_window(j0, j1, e1) * _TAMPER["glue_window"]
    if not cf > 0:
        raise InversionError(f"blend width must be positive, got {cf!r}")
    beta_f = ScaledBeta(j0.derivs[0], j1.derivs[0])
    return glue(e1, beta_f, 0.0, cf, ordered=True)


def reflect_pair(j0: Jet, j1: Jet) -> tuple[Jet, Jet]:
    """Jets at {0, 1} of ``x -> -f(1 - x)``."""

    def flip(j: Jet, base: float) -> Jet:
        return Jet(base, tuple((-1) ** (n + 1) * d for n, d in enumerate(j.derivs)))

    return flip(j1, 0.0), flip(j0, 1.0)


def extend_right(j0: Jet, j1: Jet) -> SmoothExpr:
    """Jet ``j1`` at 1 and range ``((f0_0 + f0_1)/2, +inf)``."""
    _pair_checks(j0, j1)
    return reflect(extend_left(*reflect_pair(j0, j1)))


def extend_unit_pair(j0: Jet, j1: Jet) -> SmoothExpr:
    j0, j1 = _common_order(j0, j1)
    _pair_checks(j0, j1)
    return glue(extend_left(j0, j1), extend_right(j0, j1), 0.0, 1.0, ordered=True)


def _common_order(j0: Jet, j1: Jet) -> tuple[Jet, Jet]:
    n = max(j0.order, j1.order, 1)
    return j0.padded(n), j1.padded(n)


def lambda_scale(j: Jet, c: float, base: float) -> Jet:
    """Derivatives of ``f o l`` from those of ``f`` when ``l`` has slope ``c``."""
    c = c * _TAMPER["lambda"]
    return Jet(base, tuple(d * c**n for n, d in enumerate(j.derivs)))


def extend_pair(ja: Jet, jb: Jet, a: float, c: float) -> SmoothExpr:
    """Section for the doubleton ``{a, a + c}`` sending identity jets to Identity.

    ``E = (L^-1 E2 Lambda f) o g^-1`` with ``g`` the same construction applied
    to the identity jets, so ``E`` has the prescribed jets and E(id) = id.
    """
    if not c > 0:
        raise JetError(f"doubleton spacing must be positive, got {c!r}")
    ja, jb = _common_order(ja, jb)
    if ja.is_identity() and jb.is_identity():
        return Identity()
    _pair_checks(ja, jb)
    n = ja.order
    tilde = _conjugated_unit_pair(ja, jb, a, c)
    g = _conjugated_unit_pair(identity_jet(a, n), identity_jet(a + c, n), a, c)
    return Compose(tilde, InverseOf(g))


def _conjugated_unit_pair(ja: Jet, jb: Jet, a: float, c: float) -> SmoothExpr:
    unit = extend_unit_pair(lambda_scale(ja, c, 0.0), lambda_scale(jb, c, 1.0))
    return AffinePre(unit, -a / c, 1.0 / c)


# -- integer families ---------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v))


@dataclass(frozen=True)
class ZJetFamily:
    """Jets at the integers of ``[A, B]``; identity jets everywhere else.

    ``r`` is the jet order (an int, or ``"inf"`` with ``truncate`` giving the
    stored depth).  For ``r = 0`` the slope is filled with 1.
    """

    r: int | str
    window: tuple[int, int]
    entries: dict = field(default_factory=dict)
    truncate: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "window", (int(self.window[0]), int(self.window[1])))
        object.__setattr__(self, "entries", {int(k): v for k, v in self.entries.items()})
        self.validate()

    @property
    def depth(self) -> int:
        if self.r == "inf":
            return int(self.truncate)
        return int(self.r)

    def validate(self):
        if self.r == "inf":
            if self.truncate is None or self.truncate < 0:
                raise FamilyError("r = 'inf' needs a non-negative truncation depth")
        elif not isinstance(self.r, int) or isinstance(self.r, bool) or self.r < 0:
            raise FamilyError(f"r must be a non-negative integer or 'inf', got {self.r!r}")
        A, B = self.window
        if A > B:
            raise FamilyError(f"empty window [{A}, {B}]")
        for m, j in self.entries.items():
            if not A <= m <= B:
                raise FamilyError(f"entry at {m} lies outside the window [{A}, {B}]", m)
            if j.base_point != m:
                raise FamilyError(f"entry at {m} is based at {j.base_point!r}", m)
            if j.order != self.depth:
                raise FamilyError(f"entry at {m} has order {j.order}, expected {self.depth}", m)
            if self.depth >= 1 and not j.derivs[1] > 0:
                raise FamilyError(f"f1_{m} = {_fmt(j.derivs[1])} must be > 0", m)
        prev_m, prev_v = A - 1, float(A - 1)
        for m in range(A, B + 2):
            v = self.value(m)
            if not prev_v < v:
                raise FamilyError(
                    f"f0_{{{prev_m}}} = {_fmt(prev_v)} must be < f0_{{{m}}} = {_fmt(v)}", m
                )
            prev_m, prev_v = m, v

    def value(self, m: int):
        j = self.entries.get(m)
        return float(m) if j is None else j.derivs[0]

    def jet(self, m: int) -> Jet:
        """Stored (or identity) jet at ``m`` of order ``depth``."""
        j = self.entries.get(m)
        return identity_jet(float(m), self.depth) if j is None else j

    def filled_jet(self, m: int) -> Jet:
        """Jet at ``m`` with the identity tail rule applied up to order ``max(depth, 1)``."""
        return self.jet(m).padded(max(self.depth, 1))

    def is_compactly_supported(self) -> bool:
        return all(self.filled_jet(m).is_identity() for m in self.entries)

    def support(self) -> list[int]:
        return sorted(m for m in self.entries if not self.filled_jet(m).is_identity())

    @classmethod
    def identity(cls, r: int, window: tuple[int, int]) -> "ZJetFamily":
        return cls(r, window, {})

    def to_dict(self) -> dict:
        d = {
            "r": self.r,
            "window": list(self.window),
            "jets": [{"a": m, "values": list(map(float, self.entries[m].derivs))} for m in sorted(self.entries)],
        }
        if self.r == "inf":
            d["truncate"] = self.truncate
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ZJetFamily":
        return family_from_jetfile(d)


def family_from_jetfile(d: dict) -> ZJetFamily:
    """Build a family from a JetFile document (see the CLI); raises FamilyError."""
    if not isinstance(d, dict):
        raise FamilyError("jet file must be a JSON object")
    if "r" not in d or "jets" not in d:
        raise FamilyError("jet file needs keys 'r' and 'jets'")
    r = d["r"]
    truncate = d.get("truncate")
    if r == "inf":
        if not isinstance(truncate, int) or isinstance(truncate, bool):
            raise FamilyError("'truncate' is required (integer) when r = 'inf'")
        depth = truncate
    elif isinstance(r, int) and not isinstance(r, bool):
        depth = r
    else:
        raise FamilyError(f"'r' must be an integer or \"inf\", got {r!r}")
    entries = {}
    for i, item in enumerate(d["jets"]):
        try:
            a = item["a"]
            values = item["values"]
        except (TypeError, KeyError):
            raise FamilyError(f"jets[{i}] needs 'a' and 'values'") from None
        if not isinstance(a, int) or isinstance(a, bool):
            raise FamilyError(f"jets[{i}].a must be an integer, got {a!r}")
        if a in entries:
            raise FamilyError(f"duplicate jet at a = {a}", a)
        if not isinstance(values, list) or len(values) != depth + 1:
            raise FamilyError(f"jets[{i}] (a = {a}) needs {depth + 1} values", a)
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise FamilyError(f"jets[{i}] (a = {a}) has a non-finite or non-numeric value {v!r}", a)
        entries[a] = Jet(float(a), tuple(float(v) for v in values))
    if "window" in d:
        window = tuple(d["window"])
        if len(window) != 2:
            raise FamilyError("'window' must be [A, B]")
    elif entries:
        window = (min(entries), max(entries))
    else:
        window = (0, 0)
    return ZJetFamily(r, window, entries, truncate if r == "inf" else None)


@dataclass(frozen=True)
class PiecewiseDiffeo(SmoothExpr):
    """Diffeomorphism assembled on unit intervals ``[m, m + 1]``, m in ``[A-1, B]``.

    Identity outside ``[A - 1, B + 1]``.
    """

    family: ZJetFamily
    intervals: dict = field(compare=True)
    kind = "piecewise"

    @property
    def window(self):
        return self.family.window

    @property
    def monotone(self):
        return 1

    def interval_expr(self, m: int) -> SmoothExpr:
        return self.intervals.get(m, _IDENTITY)

    def _piece(self, x):
        m = int(mpmath.floor(x)) if isinstance(x, mpmath.mpf) else math.floor(x)
        return self.intervals.get(m)

    def eval(self, x):
        piece = self._piece(x)
        return x if piece is None else piece.eval(x)

    def jet(self, x, order):
        piece = self._piece(x)
        return identity_jet(x, order) if piece is None else piece.jet(x, order)

    def inverse_eval(self, y):
        A, B = self.window
        if y <= A - 1 or y >= B + 1:
            return y
        m = A - 1
        while m < B and self.family.value(m + 1) <= y:
            m += 1
        piece = self.interval_expr(m)
        if isinstance(piece, Identity):
            return y
        try:
            x = piece.inverse_eval(y)
        except InversionError:
            x = None
        if x is None or not m <= x <= m + 1:
            x = bracketed_inverse(piece, y, m, m + 1)
        return x

    def is_identity_outside(self, lo: int, hi: int) -> bool:
        """True when every interval outside ``[lo, hi]`` is the literal Identity."""
        return all(isinstance(e, Identity) for m, e in self.intervals.items() if m < lo or m >= hi)

    def children(self):
        return tuple(self.intervals[m] for m in sorted(self.intervals))

    def to_dict(self):
        return {
            "kind": self.kind,
            "family": self.family.to_dict(),
            "intervals": [{"m": m, "expr": self.intervals[m].to_dict()} for m in sorted(self.intervals)],
        }

    def __hash__(self):
        return id(self)


_IDENTITY = Identity()


def _decode_piecewise(d):
    fam = family_from_jetfile(d["family"])
    intervals = {int(item["m"]): from_dict(item["expr"]) for item in d["intervals"]}
    A, B = fam.window
    if sorted(intervals) != list(range(A - 1, B + 1)):
        raise ExprError(f"piecewise diffeo needs intervals {A - 1}..{B}, got {sorted(intervals)}")
    for m, e in intervals.items():
        if not e.is_increasing:
            raise ExprError(f"interval [{m}, {m + 1}] expression is not flagged increasing")
    return PiecewiseDiffeo(fam, intervals)


register_kind("piecewise", _decode_piecewise)


def extend_integers(fam: ZJetFamily) -> PiecewiseDiffeo:
    """Diffeomorphism with the family's jets at every integer."""
    fam.validate()
    A, B = fam.window
    intervals = {}
    for m in range(A - 1, B + 1):
        try:
            intervals[m] = extend_pair(fam.filled_jet(m), fam.filled_jet(m + 1), float(m), 1.0)
        except (JetError, ExprError) as exc:
            raise FamilyError(f"interval [{m}, {m + 1}]: {exc}", m) from exc
    return PiecewiseDiffeo(fam, intervals)
