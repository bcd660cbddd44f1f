import math

import mpmath
import numpy as np
import pytest

from jetsec import bump_calculus as bc
from jetsec.extension_ops import (
    FamilyError,
    PiecewiseDiffeo,
    ZJetFamily,
    extend_integers,
    extend_left,
    extend_pair,
    extend_point,
    extend_right,
    extend_unit_pair,
    family_from_jetfile,
    left_window,
    reflect_pair,
    tampered,
)
from jetsec.jet_core import Jet, JetError, identity_jet, max_rel_error
from jetsec.smooth_expr import Affine, Compose, Identity, MonomialBump, Sum, from_json, reflect, to_json, walk
from jetsec.verify_harness import fd_jet_oracle, plateau_step, random_family

from conftest import rel_err


def J(a, *d):
    return Jet(float(a), tuple(float(v) for v in d))


# -- point ---------------------------------------------------------------------

def test_point_examples():
    assert extend_point(J(0, 0, 1)) == Affine(0.0, 1.0)
    assert extend_point(J(0, 5, 2)) == Affine(5.0, 2.0)
    e = extend_point(J(0, 0, 1, 0, 6))
    assert isinstance(e, Sum)
    bump = e.terms[1]
    assert bump.n == 3 and bump.b == 6.0
    assert bump.c == pytest.approx(3 * 2**6 * 6 * bc.gamma_norm_bound(3) + 3, rel=1e-15)
    assert bump.c == pytest.approx(1019828.3047006704, rel=1e-12)
    assert all(e.eval(x) == x for x in (1 / 3, -1 / 3, 0.4, -2.0, 100.0))


def test_point_reproduces_jets():
    e = extend_point(J(0, 0, 1, 0, 6))
    assert e.jet(0.0, 3).derivs == (0.0, 1.0, 0.0, 6.0)
    fd = fd_jet_oracle(e, 0.0, 3, plateau_step(e, 3))
    assert rel_err(fd.jet.derivs, [0, 1, 0, 6]) < 1e-3


def test_point_errors():
    with pytest.raises(JetError):
        extend_point(J(0, 0, 0))
    with pytest.raises(JetError):
        extend_point(J(0, 0, -1, 3))
    with pytest.raises(JetError):
        extend_point(J(1, 0, 1))


def test_point_derivative_floor_and_increasing(rng):
    for _ in range(10):
        n = int(rng.integers(2, 7))
        j = Jet(0.0, (float(rng.uniform(-1, 1)), float(rng.uniform(0.2, 5))) + tuple(rng.uniform(-5, 5, n - 1)))
        e = extend_point(j)
        assert e.is_increasing and e.range == (-math.inf, math.inf)
        xs = np.concatenate([np.linspace(-0.5, 0.5, 2001)] + [np.linspace(-1 / t.c, 1 / t.c, 201) for t in e.terms[1:]])
        assert min(e.jet(float(x), 1).derivs[1] for x in xs) >= j.derivs[1] / 2 - 1e-12


# -- rays ----------------------------------------------------------------------

def test_left_examples():
    e = extend_left(J(0, 0, 1), J(1, 1, 1))
    cf = left_window(J(0, 0, 1), J(1, 1, 1))
    assert cf == pytest.approx(1 / 3, abs=1e-15)
    assert e.range[1] == 0.5
    assert e.eval(60.0) == pytest.approx(0.5, abs=1e-12)
    assert all(e.eval(float(x)) == x for x in np.linspace(-4, cf / 3, 30))
    assert e.jet(0.0, 1).derivs == (0.0, 1.0)
    assert extend_left(J(0, -2, 1), J(1, 0, 3)).range[1] == -1
    xs = np.linspace(-5, 5, 10**4)
    assert min(e.jet(float(x), 1).derivs[1] for x in xs) > 0


def test_left_window_is_where_two_thirds_is_reached():
    j0, j1 = J(0, 0.2, 1.5, -2.0, 4.0), J(1, 1.4, 1)
    e1 = extend_point(j0)
    cf = left_window(j0, j1)
    assert e1.eval(cf) == pytest.approx((2 * 0.2 + 1.4) / 3, abs=1e-13)


def test_right_examples():
    e = extend_right(J(0, 0, 1), J(1, 1, 1))
    assert e.range[0] == 0.5
    assert e.eval(-60.0) == pytest.approx(0.5, abs=1e-12)
    assert e.jet(1.0, 2).derivs == (1.0, 1.0, 0.0)
    assert extend_right(J(0, 0, 1), J(1, 4, 2)).range[0] == 2


def test_right_is_reflected_left():
    j0, j1 = J(0, -0.3, 2.0, 1.0, -3.0), J(1, 1.1, 0.7, 0.4, 2.0)
    right = extend_right(j0, j1)
    mirrored = reflect(extend_left(*reflect_pair(j0, j1)))
    for x in np.linspace(-3, 4, 20):
        assert abs(right.eval(float(x)) - mirrored.eval(float(x))) <= 1e-10
    assert max_rel_error(right.jet(1.0, 3), j1) < 1e-12


def test_ray_pair_validation():
    with pytest.raises(JetError):
        extend_left(J(0, 1, 1), J(1, 0, 1))
    with pytest.raises(JetError):
        extend_right(J(0, 0, 1), J(1, 1, 0))


# -- unit pair -----------------------------------------------------------------

def test_unit_pair_identity_jets():
    h = extend_unit_pair(identity_jet(0.0, 2), identity_jet(1.0, 2))
    assert h.eval(0.0) == 0.0 and h.eval(1.0) == 1.0
    assert h.jet(0.0, 1).derivs == (0.0, 1.0)
    assert h.jet(1.0, 1).derivs == (1.0, 1.0)
    assert max(abs(h.eval(float(x)) - x) for x in np.linspace(0, 1, 101)) > 1e-3  # not the identity map


def test_unit_pair_reproduces_jets_and_is_surjective():
    j0, j1 = J(0, 0, 2), J(1, 3, 1)
    h = extend_unit_pair(j0, j1)
    assert h.is_increasing and h.range == (-math.inf, math.inf)
    for j in (j0, j1):
        fd = fd_jet_oracle(h, j.base_point, 1, plateau_step(h, 1))
        assert rel_err(fd.jet.derivs, j.derivs) < 1e-8
    left = extend_left(j0, j1)
    for x in np.linspace(-3, 1 / 3, 25):
        assert h.eval(float(x)) == left.eval(float(x))
    assert h.eval(-1e6) == pytest.approx(-2e6) and h.eval(1e6) == pytest.approx(1e6 + 2)
    assert h.inverse_eval(2.5) == pytest.approx(h.inverse_eval(2.5))
    assert h.eval(h.inverse_eval(2.5)) == pytest.approx(2.5, abs=1e-13)


# -- arbitrary doubleton ---------------------------------------------------------

def test_pair_identity_short_circuit():
    assert extend_pair(identity_jet(-3.0, 4), identity_jet(-2.0, 4), -3.0, 1.0) == Identity()
    assert isinstance(extend_pair(identity_jet(0.0, 0), identity_jet(2.0, 0), 0.0, 2.0), Identity)


def test_pair_unit_spacing_matches_unit_pair():
    ja, jb = J(0, 0, 1, 0.5), J(1, 1, 1, -0.5)
    e = extend_pair(ja, jb, 0.0, 1.0)
    assert isinstance(e, Compose)
    assert max_rel_error(e.jet(0.0, 2), ja) < 1e-12 and max_rel_error(e.jet(1.0, 2), jb) < 1e-12


def test_pair_lambda_scaling_and_jets():
    ja, jb = J(2, 0, 1, 0, 6), J(5, 1, 1)
    e = extend_pair(ja, jb, 2.0, 3.0)
    tilde_unit = e.f.f
    bumps = [t for t in walk(tilde_unit) if isinstance(t, MonomialBump)]
    assert [t.b for t in bumps] == [162.0]  # 27 * 6
    assert max_rel_error(e.jet(2.0, 3), ja) < 1e-9
    assert max_rel_error(e.jet(5.0, 3), jb.padded(3)) < 1e-9
    for j in (ja, jb.padded(3)):
        fd = fd_jet_oracle(e, j.base_point, 3, plateau_step(e, 3))
        assert rel_err(fd.jet.derivs, j.derivs) < 1e-7


def test_pair_errors():
    with pytest.raises(JetError):
        extend_pair(J(0, 0, 1), J(1, 1, 1), 0.0, 0.0)
    with pytest.raises(JetError):
        extend_pair(J(0, 1, 1), J(1, 0.5, 1), 0.0, 1.0)


def test_tamper_restores_constants():
    with tampered("alpha_flat", 0.5):
        assert bc.ALPHA_FLATS[0] == pytest.approx(1 / 6)
    assert bc.ALPHA_FLATS == [1 / 3, 2 / 3]
    with pytest.raises(ValueError):
        with tampered("nothing", 2.0):
            pass


# -- integers ------------------------------------------------------------------

def test_family_validation_messages():
    with pytest.raises(FamilyError, match=r"f0_\{-1\} = 0.2 must be < f0_\{0\} = 0.1"):
        ZJetFamily(1, (-1, 0), {-1: J(-1, 0.2, 1), 0: J(0, 0.1, 1)})
    with pytest.raises(FamilyError, match=r"f1_0 = -1.0 must be > 0"):
        ZJetFamily(1, (0, 0), {0: J(0, 0, -1)})
    with pytest.raises(FamilyError, match="outside the window"):
        ZJetFamily(1, (0, 0), {3: J(3, 3, 1)})
    with pytest.raises(FamilyError, match=r"f0_\{0\} = 1.5 must be < f0_\{1\} = 1.0"):
        ZJetFamily(1, (0, 0), {0: J(0, 1.5, 1)})  # identity tail at 1
    with pytest.raises(FamilyError):
        ZJetFamily("inf", (0, 0), {})
    with pytest.raises(FamilyError):
        ZJetFamily(1, (0, 0), {0: J(0, 0, 1, 2)})


def test_jetfile_parsing():
    fam = family_from_jetfile({"r": 1, "jets": [{"a": 0, "values": [0.5, 2]}]})
    assert fam.window == (0, 0) and fam.jet(0).derivs == (0.5, 2.0)
    fam = family_from_jetfile({"r": "inf", "truncate": 2, "jets": [{"a": 1, "values": [1, 1, 3]}]})
    assert fam.depth == 2
    for bad in (
        {"r": 1},
        {"r": "inf", "jets": []},
        {"r": 1.5, "jets": []},
        {"r": 1, "jets": [{"a": 0, "values": [0.5]}]},
        {"r": 1, "jets": [{"a": 0, "values": [0.5, 2]}, {"a": 0, "values": [0.5, 2]}]},
        {"r": 1, "jets": [{"a": 0.5, "values": [0.5, 2]}]},
        {"r": 1, "jets": [{"a": 0, "values": [0.5, "x"]}]},
        [],
    ):
        with pytest.raises(FamilyError):
            family_from_jetfile(bad)


def test_r0_fills_slope_one():
    fam = ZJetFamily(0, (0, 1), {0: Jet(0.0, (0.25,)), 1: Jet(1.0, (1.0,))})
    assert fam.filled_jet(0).derivs == (0.25, 1.0)
    e = extend_integers(fam)
    assert e.eval(0.0) == 0.25 and e.jet(0.0, 1).derivs[1] == pytest.approx(1.0)


def test_integers_identity_family():
    e = extend_integers(ZJetFamily.identity(2, (-2, 2)))
    assert all(isinstance(e.interval_expr(m), Identity) for m in range(-3, 3))
    assert all(e.eval(float(x)) == x for x in np.linspace(-6, 6, 37))


def test_integers_single_entry_example():
    fam = ZJetFamily(1, (0, 0), {0: J(0, 0.5, 2)})
    e = extend_integers(fam)
    assert e.eval(0.0) == 0.5 and e.jet(0.0, 1).derivs == (0.5, 2.0)
    for m in (-3, -2, -1, 1, 2, 5):
        assert e.eval(float(m)) == m
    assert all(e.eval(float(x)) == x for x in np.linspace(-5, -1, 20))
    assert all(e.eval(float(x)) == x for x in np.linspace(1, 5, 20))
    fd = fd_jet_oracle(e, 0.0, 1, plateau_step(e, 1))
    assert abs(fd.jet.derivs[1] - 2.0) < 1e-6
    assert e.inverse_eval(0.5) == 0.0
    assert e.inverse_eval(-1.0) == -1.0 and e.inverse_eval(7.5) == 7.5
    xs = np.linspace(-1.5, 1.5, 3001)
    vals = [e.eval(float(x)) for x in xs]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_integers_r3_fd_and_cross_smoothness():
    rng = np.random.default_rng(7)
    fam = random_family(rng, 3, (-1, 1))
    e = extend_integers(fam)
    for m in range(-1, 2):
        step = plateau_step(e, 5)
        fd = fd_jet_oracle(e, float(m), 3, step)
        assert max_rel_error(fd.jet, fam.jet(m)) <= 1e-7
        left = fd_jet_oracle(e.interval_expr(m - 1), float(m), 5, step)
        right = fd_jet_oracle(e.interval_expr(m), float(m), 5, step)
        assert max_rel_error(left.jet, right.jet) <= 1e-4


def test_integers_compact_support_and_serialization():
    fam = ZJetFamily(2, (-3, 3), {0: J(0, 0.1, 1.5, -1.0), 1: J(1, 1.2, 0.8, 0.3)})
    e = extend_integers(fam)
    assert e.is_identity_outside(-1, 2)
    assert all(isinstance(e.interval_expr(m), Identity) for m in (-4, -3, -2, 2, 3))
    back = from_json(to_json(e))
    assert isinstance(back, PiecewiseDiffeo)
    for x in (-0.5, 0.0, 0.3, 1.0, 1.7):
        assert back.eval(x) == e.eval(x)


def test_integers_mpf_evaluation():
    fam = ZJetFamily(1, (0, 0), {0: J(0, 0.5, 2)})
    e = extend_integers(fam)
    with mpmath.workdps(50):
        v = e.eval(mpmath.mpf("0.25"))
        assert isinstance(v, mpmath.mpf)
        assert abs(v - e.eval(0.25)) < 1e-15
