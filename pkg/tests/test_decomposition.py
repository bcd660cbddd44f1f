import json

import mpmath
import numpy as np
import pytest

from jetsec.decomposition import (
    Factorization,
    FactorizationError,
    compose_factorization,
    factorize,
    jets_at_integers,
)
from jetsec.dsl_parser import validate_diffeo
from jetsec.extension_ops import FamilyError, ZJetFamily, extend_integers
from jetsec.jet_core import Jet, identity_jet, max_rel_error
from jetsec.smooth_expr import Affine, Compose, Identity, MonomialBump, Sum
from jetsec.verify_harness import random_family

from conftest import mp_derivs

TANH = "x + 0.25*tanh(x)"


def test_identity_jets():
    fam = jets_at_integers(Identity(), 2, (-2, 2))
    assert fam.support() == [] and fam.is_compactly_supported()
    assert all(fam.jet(m).derivs == identity_jet(float(m), 2).derivs for m in range(-2, 3))


def test_r0_tail_fill():
    fam = jets_at_integers(Identity(), 0, (-1, 1))
    assert fam.jet(0).derivs == (0.0,)
    assert fam.filled_jet(0).derivs == (0.0, 1.0)


def test_tanh_jets_match_symbolic():
    h = validate_diffeo(TANH, (-9, 9))
    fam = jets_at_integers(h, 3, (-8, 8))
    for m in range(-8, 9):
        want = mp_derivs(lambda t: t + mpmath.mpf(0.25) * mpmath.tanh(t), m, 3)
        assert max_rel_error(fam.jet(m), Jet(float(m), tuple(want))) <= 1e-9


def test_jets_errors():
    with pytest.raises(FamilyError, match="slope"):
        jets_at_integers(Affine(0.0, -1.0), 1, (0, 1))
    with pytest.raises(FamilyError, match="wider window"):
        jets_at_integers(Affine(0.0, 3.0), 1, (-1, 1))  # 3 > 2 = B + 1
    with pytest.raises(FamilyError):
        jets_at_integers(Identity(), -1, (0, 1))


def test_factorize_identity():
    fac = factorize(Identity(), 2, (-3, 3))
    assert all(fac.residual.eval(float(x)) == x for x in np.linspace(-5, 5, 100))
    assert compose_factorization(fac) == Identity()


def test_factorize_built_diffeo(rng):
    fam = random_family(rng, 2, (-1, 1))
    h = extend_integers(fam)
    fac = factorize(h, 2, (-2, 2))
    assert fac.membership_error() <= 1e-6
    for m in range(-2, 3):
        assert abs(fac.residual.eval(float(m)) - m) <= 1e-9
    back = compose_factorization(fac)
    xs = np.linspace(-1.99, 1.99, 200)
    assert max(abs(back.eval(float(x)) - h.eval(float(x))) for x in xs) <= 1e-8


def test_factorize_tanh_residual_is_nontrivial():
    h = validate_diffeo(TANH, (-9, 9))
    fac = factorize(h, 2, (-8, 8))
    assert fac.membership_error() <= 1e-6
    assert max(abs(fac.residual.eval(float(x)) - x) for x in np.linspace(0, 1, 101)) > 1e-4
    back = compose_factorization(fac)
    xs = np.linspace(-7, 7, 1000)
    assert max(abs(back.eval(float(x)) - h.eval(float(x))) for x in xs) <= 1e-8


def test_compose_with_identity_jets_returns_residual():
    residual = Sum((Affine(0, 1), MonomialBump(0.01, 2, 40.0)), flags=(1, (-np.inf, np.inf)))
    fac = Factorization(ZJetFamily.identity(1, (-2, 2)), residual)
    assert compose_factorization(fac) is residual


def test_rejections():
    with pytest.raises(FactorizationError, match="bounded tails"):
        factorize(validate_diffeo("atan(x)", (-9, 9)), 1, (-8, 8))
    with pytest.raises(FactorizationError, match="orientation"):
        factorize(Affine(0.0, -1.0), 1, (-1, 1))


def test_local_perturbation_leaves_residual_jets():
    # jets of g^-1 o h at integers depend only on jets of g and h there
    fam = random_family(np.random.default_rng(3), 2, (-1, 1))
    h = extend_integers(fam)
    fac = factorize(h, 2, (-1, 1))
    bump = MonomialBump(0.05, 0, 8.0)  # supported in (-1/8, 1/8)
    shifted = Compose(h, Sum((Affine(0, 1), Compose(bump, Affine(-0.5, 1.0))), flags=(1, (-np.inf, np.inf))))
    pert = Compose(fac.residual.f, shifted)
    for m in range(-1, 2):
        a = fac.residual.jet(float(m), 2)
        b = pert.jet(float(m), 2)
        assert max_rel_error(a, b) <= 1e-7
    assert abs(pert.eval(0.5) - fac.residual.eval(0.5)) > 1e-4


def test_factorization_json_round_trip():
    h = validate_diffeo(TANH, (-4, 4))
    fac = factorize(h, 1, (-3, 3))
    d = json.loads(fac.to_json())
    assert set(d) == {"r", "window", "jets", "residual"}
    back = Factorization.from_dict(d)
    assert back.jets == fac.jets
    for x in (-2.5, 0.1, 1.9):
        assert back.residual.eval(x) == fac.residual.eval(x)
