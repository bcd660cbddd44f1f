import json
import math

import numpy as np
import pytest

from jetsec.dsl_parser import DslFunction, validate_diffeo
from jetsec.extension_ops import ZJetFamily, extend_integers, extend_point, tampered
from jetsec.jet_core import Jet, identity_jet
from jetsec.smooth_expr import Identity, MonomialBump
from jetsec.verify_harness import (
    CheckReport,
    continuity_probe,
    fd_jet_oracle,
    fd_tolerance,
    plateau_step,
    random_family,
    run_paper_property_suite,
    sup_norm_estimate,
)

from conftest import rel_err


def test_fd_examples():
    sq = validate_diffeo("x + x*x", (0, 2))
    fd = fd_jet_oracle(validate_diffeo("x*x", (0.5, 2)), 1.0, 2)
    assert rel_err(fd.jet.derivs, [1, 2, 2]) <= 1e-6
    fd = fd_jet_oracle(Identity(), 17.0, 5)
    assert rel_err(fd.jet.derivs, identity_jet(17.0, 5).derivs) <= 1e-8
    e = extend_point(Jet(0.0, (0.0, 1.0, 0.0, 6.0)))
    fd = fd_jet_oracle(e, 0.0, 3, plateau_step(e, 3))
    assert rel_err(fd.jet.derivs, [0, 1, 0, 6]) <= 1e-3
    assert sq.eval(1.0) == 2.0


@pytest.mark.parametrize("degree", range(0, 7))
def test_fd_exact_on_polynomials_within_own_estimate(degree):
    rng = np.random.default_rng(degree)
    coeffs = rng.uniform(-2, 2, degree + 1)
    src = " + ".join(f"({float(c)!r})*pow(x, {k})" for k, c in enumerate(coeffs))
    h = DslFunction(src, (-1, 1), 2, True)
    x = 0.3
    poly = np.polynomial.Polynomial(coeffs)
    exact = [poly.deriv(k)(x) if k else poly(x) for k in range(7)]
    fd = fd_jet_oracle(h, x, 6, base_step=1e-2)
    for k in range(7):
        assert abs(fd.jet.derivs[k] - exact[k]) <= fd.errors[k] + 1e-12 * max(1.0, abs(exact[k]))


def test_fd_tolerances_by_order():
    assert fd_tolerance(1) == 1e-6 and fd_tolerance(3) == 1e-4 and fd_tolerance(6) == 1e-3
    with pytest.raises(ValueError):
        fd_jet_oracle(Identity(), 0.0, 9)


def test_sup_norm_examples():
    assert sup_norm_estimate(Identity(), 1, (-5, 5), 100) == 1.0
    c = 4.0
    assert sup_norm_estimate(MonomialBump(1.0, 3, c), 0, (-1, 1), 1000) <= (1 / 6) * (1 / c) ** 3
    e = extend_point(Jet(0.0, (0.0, 1.0, 0.0, 6.0)))
    assert sup_norm_estimate(e, 1, (-1, 1), 1000) >= 0.5
    with pytest.raises(ValueError):
        sup_norm_estimate(Identity(), 0, (0, 1), 99)


def test_suite_passes_and_is_deterministic():
    r0 = run_paper_property_suite(0)
    assert r0.all_passed, r0.to_table()
    assert len(r0.checks) >= 20
    again = run_paper_property_suite(0)
    assert r0.to_json() == again.to_json()
    assert run_paper_property_suite(1).all_passed


def test_suite_detects_tampered_c3():
    with tampered("c_n", 0.01):
        report = run_paper_property_suite(0)
    assert not report.all_passed
    assert "point.c_n_formula" in [c.name for c in report.failures()]


def test_report_formats():
    r = CheckReport()
    r.add("b.check", True, 0.5, 1.0)
    r.add("a.check", False, 2.0, 1.0, "x=3")
    d = json.loads(r.to_json())
    assert [c["name"] for c in d["checks"]] == ["a.check", "b.check"]
    assert d["all_passed"] is False
    table = r.to_table().splitlines()
    assert table[0].startswith("check") and "FAIL" in table[2] and "x=3" in table[2]
    assert not CheckReport().all_passed


def test_probe_second_derivative_slope():
    # c_n grows with the perturbation, so use eps small enough that c_n ~ 3
    rep = continuity_probe("E1", identity_jet(0.0, 2), 2, [1e-5, 1e-6, 1e-7])
    assert 0.9 <= rep.slope <= 1.1


def test_probe_value_is_translation():
    eps = [1e-2, 1e-3, 1e-4]
    rep = continuity_probe("E1", identity_jet(0.0, 2), 0, eps)
    for e, d in zip(eps, rep.distances):
        assert d == pytest.approx(e, rel=1e-9)


def test_probe_integer_locality():
    fam = random_family(np.random.default_rng(2), 2, (-2, 2))
    rep = continuity_probe("EZ", fam, (0, 2), [1e-5, 1e-6, 1e-7])
    assert set(rep.changed_intervals) <= {-1, 0}
    assert rep.slope >= 0.9


def test_probe_unit_pair_and_errors():
    rep = continuity_probe("E2", (identity_jet(0.0, 2), identity_jet(1.0, 2)), (1, 2), [1e-5, 1e-6, 1e-7])
    assert rep.slope >= 0.9
    with pytest.raises(ValueError):
        continuity_probe("E1", identity_jet(0.0, 2), 2, [1e-3, 1e-2, 1e-4])
    with pytest.raises(ValueError):
        continuity_probe("E9", identity_jet(0.0, 2), 2, [1e-2, 1e-3, 1e-4])
