"""Independent oracles and the seeded property suite.

The finite-difference oracle only ever calls ``eval`` (at mpmath precision),
never the analytic jet code, so it can serve as a check on it.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from . import bump_calculus as bc
from .decomposition import compose_factorization, factorize
from .extension_ops import (
    PiecewiseDiffeo,
    ZJetFamily,
    extend_integers,
    extend_left,
    extend_pair,
    extend_point,
    extend_right,
    extend_unit_pair,
)
from .jet_core import (
    Jet,
    compose_error,
    identity_jet,
    jet_compose,
    jet_invert,
    max_rel_error,
)
from .smooth_expr import Glue, Identity, MonomialBump, SmoothExpr, Sum, walk

# order-dependent FD tolerances (relative, floor 1)
FD_TOLERANCES = {2: 1e-6, 4: 1e-4, 6: 1e-3}


def fd_tolerance(order: int) -> float:
    for k in sorted(FD_TOLERANCES):
        if order <= k:
            return FD_TOLERANCES[k]
    return 1e-2


# -- reports ------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    threshold: float
    location: str = ""


@dataclass
class CheckReport:
    checks: list = field(default_factory=list)

    def add(self, name: str, passed: bool, measured, threshold, location: str = ""):
        self.checks.append(Check(name, bool(passed), float(measured), float(threshold), location))

    def sorted(self) -> list:
        return sorted(self.checks, key=lambda c: (c.name, c.location))

    @property
    def all_passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.sorted() if not c.passed]

    def to_dict(self) -> dict:
        return {"all_passed": self.all_passed, "checks": [asdict(c) for c in self.sorted()]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_table(self) -> str:
        rows = [("check", "status", "measured", "threshold", "location")]
        for c in self.sorted():
            rows.append((c.name, "pass" if c.passed else "FAIL", f"{c.measured:.3e}", f"{c.threshold:.3e}", c.location))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


# -- finite-difference oracle -------------------------------------------------

@dataclass(frozen=True)
class FDJet:
    jet: Jet
    errors: tuple


def fd_jet_oracle(h: SmoothExpr, x, order: int, base_step: float = 1e-3, dps: int | None = None) -> FDJet:
    """Central differences at steps ``base_step * 2^-i`` (i = 0, 1, 2) with two
    Richardson levels.  ``errors[k]`` is the change made by the last level.

    Evaluations run at ``dps`` decimal digits (by default enough to keep the
    cancellation in a k-th difference far below the truncation error).
    """
    if not 0 <= order <= 8:
        raise ValueError("fd oracle supports orders 0..8")
    if dps is None:
        dps = max(30, int(order * -math.log10(base_step / 4)) + 25)
    cache: dict = {}
    with mpmath.workdps(dps):
        x0 = mpmath.mpf(x)
        step = mpmath.mpf(base_step)

        def f(q: Fraction):
            if q not in cache:
                v = h.eval(x0 + step * q.numerator / q.denominator)
                if not mpmath.isfinite(v):
                    raise ValueError(f"non-finite sample at offset {float(q) * base_step!r}")
                cache[q] = mpmath.mpf(v)
            return cache[q]

        def central(k: int, level: int):
            s = Fraction(1, 2**level)
            acc = mpmath.mpf(0)
            for i in range(k + 1):
                acc += (-1) ** i * math.comb(k, i) * f((Fraction(k, 2) - i) * s)
            return acc / (step * s) ** k

        derivs = [f(Fraction(0))]
        errors = [0.0]
        for k in range(1, order + 1):
            d = [central(k, lv) for lv in range(3)]
            r1 = [(4 * d[1] - d[0]) / 3, (4 * d[2] - d[1]) / 3]
            r2 = (16 * r1[1] - r1[0]) / 15
            derivs.append(r2)
            errors.append(float(abs(r2 - r1[1])))
        return FDJet(Jet(float(x), tuple(float(v) for v in derivs)), tuple(errors))


def plateau_step(e: SmoothExpr, order: int) -> float:
    """A step keeping an order-``order`` stencil on the exact (polynomial) pieces of ``e``.

    Near the base points every cut-off monomial is a polynomial on
    ``|x| <= 1/(2c)``, and every glue equals one branch on a third of its
    window; a stencil of half-width ``order/2 * step`` must fit in both.
    """
    nodes = list(walk(e))
    cmax = max([t.c for t in nodes if isinstance(t, MonomialBump)] + [1.0])
    wmin = min([t.t1 - t.t0 for t in nodes if isinstance(t, Glue)] + [1.0])
    k = max(order, 1)
    return min(1.0 / (4.0 * k * cmax), wmin / (40.0 * k), 1e-4)


def sup_norm_estimate(h: SmoothExpr, derivative_order: int, rng: tuple[float, float], samples: int) -> float:
    """Grid max of ``|h^(k)|`` from analytic jets."""
    if samples < 100:
        raise ValueError("need at least 100 samples")
    xs = np.linspace(rng[0], rng[1], samples)
    return max(abs(h.jet(float(x), derivative_order).derivs[derivative_order]) for x in xs)


def support_grid(term: MonomialBump, samples: int) -> np.ndarray:
    w = 1.0 / term.c
    return np.linspace(-w, w, samples)


# -- random instances ---------------------------------------------------------

def random_jet(rng: np.random.Generator, order: int, base: float = 0.0, value=None, spread: float = 3.0) -> Jet:
    v = float(rng.uniform(-1, 1)) if value is None else value
    derivs = [v]
    if order >= 1:
        derivs.append(float(rng.uniform(0.2, 5.0)))
    derivs.extend(float(rng.uniform(-spread, spread)) for _ in range(order - 1))
    return Jet(base, tuple(derivs))


def random_family(rng: np.random.Generator, r: int, window: tuple[int, int], spread: float = 3.0) -> ZJetFamily:
    """Values ``m + d_m`` with ``|d_m| < 0.45`` (always interleaved), slopes in [0.2, 5]."""
    A, B = window
    entries = {}
    for m in range(A, B + 1):
        entries[m] = random_jet(rng, r, float(m), float(m + rng.uniform(-0.45, 0.45)), spread)
    return ZJetFamily(r, window, entries)


# -- individual property checks -----------------------------------------------

def _bumps(e: SmoothExpr) -> list:
    return [t for t in walk(e) if isinstance(t, MonomialBump)]


def check_c_n_formula(report, jets):
    # recomputed from the defining formula, independently of extension_ops
    worst = 0.0
    for j in jets:
        for t in _bumps(extend_point(j)):
            fn = j.derivs[t.n]
            want = t.n * 4.0**t.n * abs(fn) / j.derivs[1] * bc.NORM_TABLE.bound(t.n) + 3.0
            worst = max(worst, abs(t.c - want) / want)
    report.add("point.c_n_formula", worst <= 1e-12, worst, 1e-12)


def check_point_section(report, jets):
    worst = max(max_rel_error(extend_point(j).jet(0.0, j.order), j) for j in jets)
    report.add("point.section_analytic", worst <= 1e-9, worst, 1e-9)


def check_point_section_fd(report, jets):
    worst = 0.0
    for j in jets:
        e = extend_point(j)
        order = min(j.order, 4)
        fd = fd_jet_oracle(e, 0.0, order, plateau_step(e, order))
        worst = max(worst, max_rel_error(fd.jet, j.truncate(order)))
    report.add("point.section_fd", worst <= 1e-4, worst, 1e-4)


def check_derivative_floor(report, jets, samples):
    worst = math.inf
    for j in jets:
        e = extend_point(j)
        pts = [np.linspace(-0.5, 0.5, samples)] + [support_grid(t, 200) for t in _bumps(e)]
        d = min(e.jet(float(x), 1).derivs[1] for x in np.concatenate(pts))
        worst = min(worst, d - j.derivs[1] / 2)
    report.add("point.derivative_floor", worst >= -1e-12, worst, -1e-12)


def check_affine_tails(report, jets):
    bad = 0
    for j in jets:
        e = extend_point(j)
        f0, f1 = j.derivs[0], j.derivs[1]
        for x in (1 / 3, -1 / 3, 0.5, -0.75, 3.0, -40.0, 1e6):
            if e.eval(x) != f0 + f1 * x:
                bad += 1
            if isinstance(e, Sum) and len(e.active_terms(x)) != 1:
                bad += 1
    report.add("point.affine_tails", bad == 0, bad, 0)


def check_series_bound(report, jets, samples):
    worst = -math.inf
    where = ""
    for j in jets:
        f1 = j.derivs[1]
        for t in _bumps(extend_point(j)):
            for s in range(0, 5):
                if t.n < s + 2 or t.n > 8:
                    continue
                bound = t.n ** (s - 1) * f1 / 2**t.n
                sup = max(abs(t.jet(float(x), s).derivs[s]) for x in support_grid(t, samples))
                if sup / bound > worst:
                    worst, where = sup / bound, f"n={t.n} s={s}"
    if worst == -math.inf:
        worst = 0.0
    report.add("point.series_bound", worst <= 1.0, worst, 1.0, where)


def check_cutoff_bound(report, samples):
    worst = 0.0
    where = ""
    for c in (1.0, 2.0, 10.0):
        for n in range(0, 7):
            t = MonomialBump(float(math.factorial(n)), n, c)
            xs = support_grid(t, samples)
            for s in range(0, n + 1):
                bound = (2 * n) ** s * c ** (s - n) * bc.NORM_TABLE.bound(s)
                sup = max(abs(t.jet(float(x), s).derivs[s]) for x in xs)
                if bound > 0 and sup / bound > worst:
                    worst, where = sup / bound, f"c={c} n={n} s={s}"
    report.add("bump.cutoff_bound", worst <= 1.0, worst, 1.0, where)


def check_bump_shapes(report):
    bad = 0
    for x in np.linspace(-2, 1 / 3, 50):
        bad += bc.alpha_eval(float(x)) != 0.0
    for x in np.linspace(2 / 3, 3, 50):
        bad += bc.alpha_eval(float(x)) != 1.0
    bad += not 0 < bc.alpha_eval(0.5) < 1
    report.add("bump.alpha_flats", bad == 0, bad, 0)
    bad = sum(bc.gamma_eval(float(x)) != 1.0 for x in np.linspace(-0.5, 0.5, 41))
    bad += sum(bc.gamma_eval(float(x)) != 0.0 for x in (-5, -1, 1, 2.5))
    report.add("bump.gamma_plateau", bad == 0, bad, 0)
    vals = [bc.beta_eval(float(x)) for x in np.linspace(-40, 40, 401)]
    ok = all(1 / 3 <= v <= 0.5 for v in vals) and all(a <= b for a, b in zip(vals, vals[1:]))
    report.add("bump.beta_range", ok, 0 if ok else 1, 0)


def _left_window_oracle(j0: Jet, j1: Jet) -> float:
    """Bisection for ``E1(x) = (2 f0_0 + f0_1)/3`` on the raw point extension."""
    e1 = extend_point(j0)
    target = (2 * j0.derivs[0] + j1.derivs[0]) / 3
    lo, hi = 0.0, 1.0
    while e1.eval(hi) < target:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if e1.eval(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def check_left_glue(report, pairs):
    bad = 0
    for j0, j1 in pairs:
        cf = _left_window_oracle(j0, j1)
        e0 = extend_left(j0, j1)
        e1 = extend_point(j0)
        v0, v1 = j0.derivs[0], j1.derivs[0]
        beta = lambda x: 0.5 * (v0 + v1) - (v1 - v0) / (6 * (1 + math.exp(2 * x)))
        for x in np.linspace(-2, cf / 3 * (1 - 1e-9), 40):
            bad += e0.eval(float(x)) != e1.eval(float(x))
        for x in np.linspace(2 * cf / 3 * (1 + 1e-9), 30, 40):
            bad += abs(e0.eval(float(x)) - beta(float(x))) > 1e-14 * max(1, abs(v1))
    report.add("left.glue_flats", bad == 0, bad, 0)


def check_ranges(report, pairs, samples):
    worst_left = worst_right = -math.inf
    tail = math.inf
    for j0, j1 in pairs:
        mid = 0.5 * (j0.derivs[0] + j1.derivs[0])
        el, er = extend_left(j0, j1), extend_right(j0, j1)
        xs = np.linspace(-50, 50, samples)
        worst_left = max(worst_left, max(el.eval(float(x)) for x in xs) - mid)
        worst_right = max(worst_right, max(mid - er.eval(float(x)) for x in xs))
        tail = min(tail, el.eval(50.0) - (mid - 1e-6), (mid + 1e-6) - er.eval(-50.0))
    report.add("left.range_upper", worst_left <= 0, worst_left, 0.0)
    report.add("right.range_lower", worst_right <= 0, worst_right, 0.0)
    report.add("pair.range_tails", tail > 0, tail, 0.0)


def check_pair_sections(report, rng):
    worst = 0.0
    where = ""
    cases = [(0.0, 1.0), (-2.0, 0.5), (3.0, 2.0), (1.0, 3.0)]
    for a, c in cases:
        ja = random_jet(rng, 4, a, a + float(rng.uniform(-0.2, 0.2)) * c)
        jb = random_jet(rng, 4, a + c, a + c + float(rng.uniform(-0.2, 0.2)) * c)
        e = extend_pair(ja, jb, a, c)
        for j in (ja, jb):
            err = max_rel_error(e.jet(j.base_point, 4), j)
            if err > worst:
                worst, where = err, f"a={a} c={c} at {j.base_point}"
    report.add("pair.section_analytic", worst <= 1e-9, worst, 1e-9, where)
    # each factor of E = tilde o g^-1 is itself a section: tilde carries f, g the identity
    worst = 0.0
    for a, c in cases[1:]:
        ja = random_jet(rng, 3, a, a + float(rng.uniform(-0.2, 0.2)) * c)
        jb = random_jet(rng, 3, a + c, a + c + float(rng.uniform(-0.2, 0.2)) * c)
        e = extend_pair(ja, jb, a, c)
        tilde, g = e.f, e.g.f
        for j in (ja, jb):
            x = j.base_point
            worst = max(worst, max_rel_error(tilde.jet(x, 3), j), max_rel_error(g.jet(x, 3), identity_jet(x, 3)))
    report.add("pair.conjugation_jets", worst <= 1e-9, worst, 1e-9)
    unit = extend_unit_pair(random_jet(rng, 3, 0.0, 0.0), random_jet(rng, 3, 1.0, 1.0))
    ok = unit.is_increasing
    report.add("pair.unit_increasing", ok, 0 if ok else 1, 0)


def check_identity_normalization(report):
    bad = 0
    for a, c in ((0.0, 1.0), (-3.0, 2.0), (5.0, 0.25)):
        for order in (0, 1, 3, 6):
            e = extend_pair(identity_jet(a, order), identity_jet(a + c, order), a, c)
            bad += not isinstance(e, Identity)
    report.add("pair.identity_normalization", bad == 0, bad, 0)


def check_jet_algebra(report, rng):
    f = Jet(0.0, (0.0, 1.0, 2.0))
    comp = jet_compose(f, f)
    inv = jet_invert(f)
    e1 = max_rel_error(comp, Jet(0.0, (0.0, 1.0, 4.0)))
    e2 = max_rel_error(inv, Jet(0.0, (0.0, 1.0, -2.0)))
    report.add("jets.hand_values", max(e1, e2) <= 1e-12, max(e1, e2), 1e-12)
    worst = 0.0
    for _ in range(20):
        j = random_jet(rng, int(rng.integers(1, 8)), float(rng.uniform(-2, 2)), spread=2.0)
        inv = jet_invert(j)
        back = jet_compose(inv, j)
        worst = max(worst, compose_error(back, identity_jet(j.base_point, j.order), inv, j))
    report.add("jets.invert_roundtrip", worst <= 1e-9, worst, 1e-9)


def check_integers(report, rng):
    fams = [random_family(rng, int(rng.integers(1, 5)), (-1, 2)) for _ in range(3)]
    worst = 0.0
    for fam in fams:
        e = extend_integers(fam)
        for m in range(fam.window[0], fam.window[1] + 1):
            worst = max(worst, max_rel_error(e.jet(float(m), fam.depth), fam.jet(m)))
    report.add("integers.section_analytic", worst <= 1e-9, worst, 1e-9)

    fam = fams[0]
    e = extend_integers(fam)
    worst_fd = worst_smooth = 0.0
    order = min(fam.depth, 3)
    for m in range(fam.window[0], fam.window[1] + 1):
        step = plateau_step(e, order + 2)
        fd = fd_jet_oracle(e, float(m), order, step)
        worst_fd = max(worst_fd, max_rel_error(fd.jet, fam.jet(m).truncate(order)))
        left = fd_jet_oracle(e.interval_expr(m - 1), float(m), order + 2, step)
        right = fd_jet_oracle(e.interval_expr(m), float(m), order + 2, step)
        worst_smooth = max(worst_smooth, max_rel_error(left.jet, right.jet))
    report.add("integers.section_fd", worst_fd <= 1e-4, worst_fd, 1e-4)
    report.add("integers.cross_smoothness", worst_smooth <= 1e-4, worst_smooth, 1e-4)

    support = ZJetFamily(fam.r, (-2, 3), {m: fam.jet(m) for m in range(-1, 3)})
    e = extend_integers(support)
    ok = e.is_identity_outside(-2, 3) and all(e.eval(x) == x for x in (-7.5, -3.0, 4.0, 9.25))
    report.add("integers.compact_support", ok, 0 if ok else 1, 0)


def check_factorization(report, rng):
    fam = random_family(rng, 2, (-1, 1))
    h = extend_integers(fam)
    fac = factorize(h, 2, (-2, 2))
    back = compose_factorization(fac)
    xs = np.linspace(-1.95, 1.95, 60)
    err = max(abs(back.eval(float(x)) - h.eval(float(x))) for x in xs)
    report.add("factor.roundtrip", err <= 1e-8, err, 1e-8)
    m_err = fac.membership_error()
    report.add("factor.membership", m_err <= 1e-6, m_err, 1e-6)


# -- suite --------------------------------------------------------------------

def run_paper_property_suite(seed: int = 0, samples: int = 1500) -> CheckReport:
    """Every construction invariant on seeded random instances; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    report = CheckReport()
    jets = [random_jet(rng, order, 0.0) for order in (2, 3, 4, 5, 6)]
    jets.append(Jet(0.0, (0.0, 1.0, 0.0, 6.0)))
    pairs = []
    for _ in range(3):
        j0 = random_jet(rng, 3, 0.0)
        j1 = random_jet(rng, 3, 1.0, j0.derivs[0] + float(rng.uniform(0.1, 2.0)))
        pairs.append((j0, j1))

    steps = [
        (check_jet_algebra, (report, rng)),
        (check_bump_shapes, (report,)),
        (check_cutoff_bound, (report, samples // 3)),
        (check_c_n_formula, (report, jets)),
        (check_point_section, (report, jets)),
        (check_point_section_fd, (report, jets[:3])),
        (check_derivative_floor, (report, jets, samples)),
        (check_affine_tails, (report, jets)),
        (check_series_bound, (report, jets, samples // 3)),
        (check_left_glue, (report, pairs)),
        (check_ranges, (report, pairs, samples)),
        (check_pair_sections, (report, rng)),
        (check_identity_normalization, (report,)),
        (check_integers, (report, rng)),
        (check_factorization, (report, rng)),
    ]
    for fn, args in steps:
        try:
            fn(*args)
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            report.add(fn.__name__.replace("check_", "") + ".raised", False, 1, 0, f"{type(exc).__name__}: {exc}")
    return report


def check_section(diffeo: SmoothExpr, fam: ZJetFamily, tol: float = 1e-9) -> CheckReport:
    """Does ``diffeo`` carry the jets of ``fam`` at every window integer?"""
    report = CheckReport()
    A, B = fam.window
    for m in range(A, B + 1):
        err = max_rel_error(diffeo.jet(float(m), fam.depth), fam.jet(m))
        report.add("section.jet", err <= tol, err, tol, f"x={m}")
    if isinstance(diffeo, PiecewiseDiffeo) and fam.is_compactly_supported():
        ok = diffeo.is_identity_outside(A, B + 1) or not fam.support()
        report.add("section.identity_tails", ok, 0 if ok else 1, 0)
    return report


# -- continuity probe ---------------------------------------------------------

@dataclass(frozen=True)
class ProbeReport:
    eps: tuple
    distances: tuple
    slope: float
    changed_intervals: tuple = ()


def continuity_probe(operator: str, base, component, eps_list, rng=(-3.0, 3.0), samples: int = 2001) -> ProbeReport:
    """Log-log slope of ``sup |E(f + eps e_k) - E(f)|`` over ``rng`` against eps.

    ``operator`` is "E1" (base: Jet at 0, component: n), "E2" (base: pair of
    jets at 0 and 1, component: (side, n)) or "EZ" (base: ZJetFamily,
    component: (m, n)).  Diagnostic only.
    """
    eps_list = list(eps_list)
    if len(eps_list) < 3 or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be decreasing with at least 3 entries")

    def bump(j: Jet, n: int, eps: float) -> Jet:
        d = list(j.derivs)
        d[n] += eps
        return Jet(j.base_point, tuple(d))

    if operator == "E1":
        anchors = [base.base_point]
        build = lambda eps: extend_point(bump(base, component, eps))
    elif operator == "E2":
        side, n = component
        anchors = [0.0, 1.0]
        build = lambda eps: extend_unit_pair(
            bump(base[0], n, eps) if side == 0 else base[0], bump(base[1], n, eps) if side == 1 else base[1]
        )
    elif operator == "EZ":
        m, n = component
        anchors = [float(m)]

        def build(eps):
            entries = dict(base.entries)
            entries[m] = bump(base.jet(m), n, eps)
            return extend_integers(ZJetFamily(base.r, base.window, entries, base.truncate))
    else:
        raise ValueError(f"unknown operator {operator!r}")

    # bumps for large jets are supported on ~1/c, so refine around the anchors
    local = [a + s * np.linspace(-1.0, 1.0, 201) for a in anchors for s in (1e-1, 1e-2, 1e-3, 1e-4)]
    xs = np.concatenate([np.linspace(rng[0], rng[1], samples)] + local)
    xs = np.unique(xs[(xs >= rng[0]) & (xs <= rng[1])])
    ref = build(0.0)
    ref_vals = np.array([ref.eval(float(x)) for x in xs])
    dists = []
    changed = set()
    for eps in eps_list:
        e = build(eps)
        vals = np.array([e.eval(float(x)) for x in xs])
        diff = np.abs(vals - ref_vals)
        dists.append(float(diff.max()))
        changed.update(int(math.floor(x)) for x, d in zip(xs, diff) if d > 0)
    logs = np.log(np.array(eps_list))
    with np.errstate(divide="ignore"):
        logd = np.log(np.array(dists))
    slope = float(np.polyfit(logs, logd, 1)[0]) if np.all(np.isfinite(logd)) else float("nan")
    return ProbeReport(tuple(eps_list), tuple(dists), slope, tuple(sorted(changed)))
