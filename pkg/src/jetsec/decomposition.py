"""Splitting an increasing diffeomorphism into integer jets and a jet-trivial residual.

``factorize(h)`` returns ``(J, R)`` with ``J`` the jets of ``h`` at the
integers of a window and ``R = E(J)^-1 o h``, where ``E`` is the integer
extension operator.  ``compose_factorization`` rebuilds ``h = E(J) o R``.
Outside the window ``E(J)`` is the identity, so the residual is jet-trivial
at the window integers only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .extension_ops import FamilyError, PiecewiseDiffeo, ZJetFamily, extend_integers, family_from_jetfile
from .jet_core import Jet, JetError, identity_jet, max_rel_error
from .smooth_expr import ExprError, Compose, Identity, InverseOf, SmoothExpr, from_dict

MEMBERSHIP_TOL = 1e-6


class FactorizationError(ValueError):
    pass


def jets_at_integers(h: SmoothExpr, r: int, window: tuple[int, int]) -> ZJetFamily:
    """Jets of ``h`` of order ``r`` at each integer of ``window``.

    Entries equal to the identity jet are dropped so that the family's
    support reflects where ``h`` actually differs from the identity.
    """
    A, B = int(window[0]), int(window[1])
    if A > B:
        raise FamilyError(f"empty window [{A}, {B}]")
    if isinstance(r, bool) or not isinstance(r, int) or r < 0:
        raise FamilyError(f"r must be a non-negative integer, got {r!r}")
    entries = {}
    for m in range(A, B + 1):
        x = float(m)
        j = h.jet(x, max(r, 1))
        if not j.derivs[1] > 0:
            raise FamilyError(f"slope {j.derivs[1]!r} <= 0 at integer {m}", m)
        j = Jet(x, j.derivs[: r + 1])
        if j.derivs != identity_jet(x, r).derivs:
            entries[m] = j
    try:
        return ZJetFamily(r, (A, B), entries)
    except FamilyError as exc:
        raise FamilyError(
            f"values at integers are not compatible with identity tails outside [{A}, {B}] "
            f"({exc}); try a wider window",
            exc.index,
        ) from None


def section(fam: ZJetFamily) -> SmoothExpr:
    """``E(fam)``, or the literal Identity when the family is all identity."""
    if not fam.support():
        return Identity()
    return extend_integers(fam)


@dataclass(frozen=True)
class Factorization:
    jets: ZJetFamily
    residual: SmoothExpr

    @property
    def r(self):
        return self.jets.r

    @property
    def window(self):
        return self.jets.window

    def membership_error(self) -> float:
        """Largest deviation of the residual's jets at window integers from identity jets."""
        A, B = self.window
        depth = self.jets.depth
        worst = 0.0
        for m in range(A, B + 1):
            j = self.residual.jet(float(m), depth)
            worst = max(worst, max_rel_error(j, identity_jet(float(m), depth)))
        return worst

    def to_dict(self) -> dict:
        d = self.jets.to_dict()
        return {"r": d["r"], "window": d["window"], "jets": d["jets"], "residual": self.residual.to_dict()}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), allow_nan=False, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "Factorization":
        fam = family_from_jetfile({"r": d["r"], "window": d["window"], "jets": d["jets"]})
        return cls(fam, from_dict(d["residual"]))


def factorize(h: SmoothExpr, r: int, window: tuple[int, int]) -> Factorization:
    if h.monotone < 0:
        raise FactorizationError("orientation-reversing diffeomorphisms are not supported")
    if getattr(h, "surjective", True) is False:
        raise FactorizationError(
            "input has bounded tails (not surjective onto the line), so it is not a diffeomorphism of R"
        )
    fam = jets_at_integers(h, r, window)
    e = section(fam)
    if isinstance(e, Identity):
        return Factorization(fam, h)
    return Factorization(fam, Compose(InverseOf(e), h))


def compose_factorization(fac: Factorization) -> SmoothExpr:
    e = section(fac.jets)
    if isinstance(e, Identity):
        return fac.residual
    return Compose(e, fac.residual)


__all__ = [
    "Factorization",
    "FactorizationError",
    "MEMBERSHIP_TOL",
    "compose_factorization",
    "factorize",
    "jets_at_integers",
    "section",
    # re-exported for callers handling errors uniformly
    "FamilyError",
    "JetError",
    "ExprError",
    "PiecewiseDiffeo",
]
