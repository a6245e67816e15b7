import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_doubling.cutoff import radii_sequence, zeta_sum
from orlicz_doubling.errors import ContractError, DomainError
from orlicz_doubling.iteration import (
    best_doubling_bound,
    doubling_bound,
    find_contradiction,
    induction_holds,
    induction_threshold,
    minimal_c_tilde,
    pj_sequence,
    read_trace_csv,
    recursion_check,
    superradius_lower_bound,
    write_trace_csv,
)
from orlicz_doubling.metric import ball_measure
from orlicz_doubling.young import YoungFunction

LP2 = YoungFunction.log_power(2.0)


def brute_threshold(alpha, gamma, ct, jmax=200_000):
    """Least P_1 with (ln P_1 + j - 1)^alpha >= e Ct (j+1)^gamma for j = 1..jmax, by scan and bisection."""
    j = np.arange(1, jmax + 1, dtype=float)
    rhs = math.e * ct * (j + 1) ** gamma

    def ok(lp):
        return bool(np.all((np.maximum(lp + j - 1, 0)) ** alpha >= rhs))

    lo, hi = 0.0, 1.0
    while not ok(hi):
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return math.exp(hi)


def synthetic_trace(p1, alpha, gamma, ct, J=40, mu_star=1.0, slack=1 + 1e-9, mu_half=None):
    """Trace whose P_j follow the derived recursion with equality times ``slack``."""
    p = [p1]
    for j in range(1, J):
        p.append(slack * p[-1] * math.log(p[-1]) ** alpha / (ct * (j + 1) ** gamma))
    j = np.arange(1, J + 1, dtype=float)
    m = mu_star / (ct * j**gamma * np.array(p))
    return pj_sequence(m, mu_star, ct, gamma, mu_half=mu_half)


def test_pj_sequence_basic():
    tr = pj_sequence(np.full(5, 2.0), 2.0, 1.0, 2.0)
    assert np.allclose(tr.p, 1.0 / np.arange(1, 6) ** 2, rtol=1e-12)
    with pytest.raises(DomainError):
        pj_sequence([1.0, 0.0], 1.0, 1.0, 2.0)
    with pytest.raises(ContractError):
        pj_sequence([1.0], 1.0, 1.0, 2.0)


def test_pj_sequence_euclidean(eucl_grid):
    r, ct = 0.25, 3.0
    seq = radii_sequence(r, 2.0, 20)
    m = [ball_measure(eucl_grid, None, rj) for rj in seq.radii]
    tr = pj_sequence(m, ball_measure(eucl_grid, None, 2 * r), ct, 2.0, ball_measure(eucl_grid, None, r / 2))
    j = tr.j.astype(float)
    assert np.all(tr.p >= 4 / (ct * j**2) * 0.9) and np.all(tr.p <= 16 / (ct * j**2) * 1.1)
    assert np.all(tr.p <= tr.cap() * (1 + 1e-12))
    rep = recursion_check(tr, LP2)
    assert rep.all_hold and np.all(tr.p < 2)


def test_pj_grows_on_exp_power(exp1_grid):
    r = 0.3
    seq = radii_sequence(r, 1.5, 12)
    m = [ball_measure(exp1_grid, None, rj) for rj in seq.radii]
    tr = pj_sequence(m, ball_measure(exp1_grid, None, 2 * r), 1.0, 1.5)
    # mass concentrates at the rim, so P_j first grows; on discs it only decays
    assert tr.p[1] > 1.5 * tr.p[0] and tr.p.max() > tr.p[0]
    assert np.all(np.diff(tr.measures) < 0)


def test_setup_violation_located():
    tr = synthetic_trace(40.0, 2.0, 1.5, 1.0, J=8)
    m = np.array(tr.measures)
    m[3] *= 10  # makes mu*/mu(B_4) too small at j = 3
    bad = pj_sequence(m, tr.mu_star, tr.c_tilde, tr.gamma)
    assert recursion_check(tr, LP2).all_hold
    rep = recursion_check(bad, LP2)
    assert rep.first_failure() == 3
    assert not rep.steps[2].setup_holds and all(s.setup_holds for s in rep.steps if s.j != 3 and s.j != 4)


def test_inactive_steps_flagged():
    tr = pj_sequence([1.0, 0.1, 0.01], 1.0, 1.0, 2.0)
    rep = recursion_check(tr, LP2)
    assert not rep.steps[0].active and rep.steps[0].derived_holds is None
    assert rep.first_active() == 2


def test_recursion_requires_log_power():
    tr = pj_sequence([1.0, 1.0], 1.0, 1.0, 2.0)
    with pytest.raises(ContractError):
        recursion_check(tr, YoungFunction.power(2))


def test_induction_from_threshold():
    alpha, gamma, ct = 2.0, 1.5, 1.0
    thr = induction_threshold(alpha, gamma, ct).sharper
    tr = synthetic_trace(thr * 1.0001, alpha, gamma, ct, J=30)
    assert recursion_check(tr, LP2).all_hold
    assert np.all(induction_holds(tr))


def test_threshold_closed_form():
    rep = induction_threshold(2.0, 1.5, 1.0)
    ref = float(mpmath.exp(2 + mpmath.mpf("0.25") * mpmath.e**2))
    assert abs(rep.closed_form - ref) <= 1e-9 * ref
    assert rep.closed_form == pytest.approx(46.87, abs=0.01)
    assert induction_threshold(2.0, 1.5, 1e-12).closed_form == pytest.approx(math.e**2, rel=1e-5)


@pytest.mark.parametrize("alpha,gamma,ct", [(2.0, 1.5, 1.0), (3.0, 1.2, 5.0), (1.5, 1.1, 0.3), (4.0, 3.5, 2.0)])
def test_sharper_matches_brute_force(alpha, gamma, ct):
    rep = induction_threshold(alpha, gamma, ct)
    assert rep.sharper == pytest.approx(brute_threshold(alpha, gamma, ct), rel=1e-9)
    assert rep.sharper <= rep.closed_form


def test_threshold_errors():
    with pytest.raises(DomainError):
        induction_threshold(2.0, 2.0, 1.0)
    with pytest.raises(DomainError):
        induction_threshold(2.0, 1.0, 1.0)


def test_threshold_monotone():
    cts = np.geomspace(0.01, 100, 12)
    for alpha in (1.8, 2.5, 4.0):
        vals = [induction_threshold(alpha, 1.5, c) for c in cts]
        for key in ("sharper", "closed_form"):
            seq = np.array([getattr(v, key) for v in vals])
            fin = seq[np.isfinite(seq)]
            assert np.all(np.diff(fin) >= 0) and np.all(np.isinf(seq[fin.size:]))
    alphas = np.linspace(1.6, 5, 12)
    vals = [induction_threshold(a, 1.5, 2.0).closed_form for a in alphas]
    assert np.all(np.diff(vals) <= 0)


def test_doubling_bound():
    assert doubling_bound(2.0, 1.5, 1.0, "closed") == pytest.approx(46.8647, rel=1e-5)
    assert doubling_bound(2.0, 1.5, 1.0) <= doubling_bound(2.0, 1.5, 1.0, "closed")
    vals = np.array([doubling_bound(2.0, 1.5, c) for c in np.geomspace(1, 50, 10)])
    fin = vals[np.isfinite(vals)]
    assert np.all(np.diff(fin) >= 0) and np.all(np.isinf(vals[fin.size:]))
    with pytest.raises(ContractError):
        doubling_bound(2.0, 1.5, 1.0, "loose")


def test_best_doubling_bound():
    g, cd = best_doubling_bound(3.0, 1.0)
    assert 1.0 < g <= 2.0 and math.isfinite(cd)
    grid = [1.3, 1.5, 1.7]
    g, cd = best_doubling_bound(3.0, 1.0, gammas=grid)
    ref = min((doubling_bound(3.0, gg, 4 * zeta_sum(gg)), gg) for gg in grid)
    assert (cd, g) == ref


def test_euclidean_ratio_below_bound(eucl_grid):
    D = ball_measure(eucl_grid, None, 0.5) / ball_measure(eucl_grid, None, 0.25)
    for ct in (1.0, 3.0, 10.0):
        assert D <= doubling_bound(2.0, 1.5, ct)


def test_contradiction_fires():
    alpha, gamma, ct = 2.0, 1.5, 1.0
    thr = induction_threshold(alpha, gamma, ct).sharper
    tr = synthetic_trace(2 * thr, alpha, gamma, ct, J=40, mu_half=1.0 / 16)
    con = find_contradiction(tr, LP2)
    assert con.fired and con.violating_j <= 40 and con.predicted_j is not None


def test_contradiction_quiet_below_threshold(eucl_grid):
    seq = radii_sequence(0.25, 1.5)
    m = [ball_measure(eucl_grid, None, rj) for rj in seq.radii]
    tr = pj_sequence(m, ball_measure(eucl_grid, None, 0.5), 4 * zeta_sum(1.5), 1.5,
                     ball_measure(eucl_grid, None, 0.125))
    con = find_contradiction(tr, LP2)
    assert not con.fired and "below" in con.reason


def test_superradius_bound_examples():
    v = superradius_lower_bound(1.5, 0.1, 1.0, 1.0)
    assert v.vacuous and v.value == 0.0
    with pytest.raises(DomainError):
        superradius_lower_bound(1.5, 0.5, 1.0, 10.0)
    b = superradius_lower_bound(1.5, 0.1, 1.0, 30.0)
    assert b.exponent == pytest.approx(0.4)
    assert b.value == pytest.approx(b.C_eps * math.log(30.0) ** 0.4, rel=1e-12)
    assert b.implicit_value >= b.value
    # the bound grows like (ln D)^0.4 along closed-form doubling ratios
    from orlicz_doubling.metric import DegeneracyProfile, volume_asymptotic
    prof = DegeneracyProfile.exp_power(0.5)
    r = 0.2
    D = volume_asymptotic(prof, r) / volume_asymptotic(prof, r / 2)
    assert superradius_lower_bound(1.5, 0.1, 1.0, D).value == pytest.approx(b.C_eps * math.log(D) ** 0.4)


@pytest.mark.parametrize("alpha,gamma,ct", [(2.0, 1.5, 1.0), (3.0, 1.2, 7.0)])
def test_superradius_reduces_to_doubling(alpha, gamma, ct):
    # with phi(r) = r the implicit bound caps the measure ratio at the closed-form doubling bound
    D = doubling_bound(alpha, gamma, ct, "closed")
    assert minimal_c_tilde(D, alpha, gamma) == pytest.approx(ct, rel=1e-9)


def test_trace_csv_roundtrip(tmp_path):
    tr = synthetic_trace(30.0, 2.0, 1.5, 1.0, J=6, mu_half=1e-6)
    p = write_trace_csv(tr, tmp_path / "t.csv", recursion_check(tr, LP2))
    back = read_trace_csv(p)
    assert np.array_equal(back.p, tr.p) and back.mu_half == tr.mu_half
    assert p.read_text().splitlines()[0] == "j,r_j,mu_B_j,P_j,verdict"


@settings(max_examples=200, deadline=None)
@given(st.floats(1.01, 1e6), st.floats(1.2, 4.0), st.floats(1.01, 1.19), st.floats(0.05, 20.0),
       st.lists(st.floats(0.5, 1.5), min_size=12, max_size=12))
def test_setup_implies_recursion(p1, alpha, gamma, ct, noise):
    """Whenever the setup inequality holds with P_j > 1, the derived recursion does."""
    phi = YoungFunction.log_power(alpha)
    tr = synthetic_trace(p1, alpha, gamma, ct, J=2)
    p = [p1]
    for j, z in enumerate(noise, start=1):
        nxt = z * max(p[-1], 1.0001) * math.log(max(p[-1], 1.0001)) ** alpha / (ct * (j + 1) ** gamma)
        p.append(min(max(nxt, 1e-3), 1e30))
    jj = np.arange(1, len(p) + 1, dtype=float)
    tr = pj_sequence(1.0 / (ct * jj**gamma * np.array(p)), 1.0, ct, gamma)
    rep = recursion_check(tr, phi)
    assert rep.implication_violations() == []
    # high-precision oracle for the setup verdict
    mpmath.mp.dps = 50
    for s in rep.steps:
        k = s.j - 1
        lhs = mpmath.mpf(tr.p[k]) * mpmath.log(mpmath.mpf(tr.p[k])) ** alpha if tr.p[k] > 1 else 0
        rhs = mpmath.mpf(tr.mu_star) / mpmath.mpf(tr.measures[k + 1])
        if abs(lhs - rhs) > 1e-12 * rhs:
            assert s.setup_holds == bool(lhs <= rhs)
