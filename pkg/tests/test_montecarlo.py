from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bdchain import montecarlo as mc
from bdchain import oracle as orc
from bdchain.analytics import Extended

from conftest import drift, ec2, example1, mirrored, srw


def exact_mean(spec, m):
    model = orc.TruncatedChainModel.from_spec(spec, spec.k + m + 1, exact=False)
    return orc.expected_value_of(orc.evolve_distribution(model, spec.k, m))


def test_rule_validation():
    with pytest.raises(ValueError):
        mc.StoppingRule("truncation")
    with pytest.raises(ValueError):
        mc.StoppingRule("interval-exit", b=0)
    with pytest.raises(ValueError):
        mc.StoppingRule("forever", m=1)
    with pytest.raises(ValueError):
        mc.estimate_expectation(srw(5), mc.interval_exit(5), 10, 1)
    assert mc.truncated_interval_exit(3, 9).label() == "truncated-interval-exit(m=3, b=9)"


@pytest.mark.parametrize("spec", [srw(5), example1(1), drift(2)], ids=lambda s: s.name)
def test_truncation_zero(spec):
    rec = mc.simulate_path(spec, mc.truncation(0), 1, 0)
    assert (rec.stopping_time, rec.terminal_state, rec.visits) == (0, spec.k, {})
    occ = mc.estimate_occupation(spec, mc.truncation(0), 10, 1)
    assert all(v == 0 for v in occ.profile.values.values())


def test_symmetric_exit_frequencies():
    est = mc.estimate_expectation(srw(1), mc.interval_exit(2), 10**5, 3)
    # terminal is 0 or 2, so mean / 2 is the frequency of the upper exit
    assert abs(est.mean / 2 - 0.5) <= est.half_width_95 / 2 * 1.5


def test_drift_exit_frequency_matches_recursion():
    spec = drift(1)
    target = float(orc.exit_probs_by_recursion(orc.TruncatedChainModel.from_spec(spec, 3), 1)[1])
    est = mc.estimate_expectation(spec, mc.interval_exit(3), 10**5, 4)
    assert target == pytest.approx(4 / 7)
    assert abs(est.mean / 3 - target) <= est.half_width_95 / 3 * 1.5


def test_symmetric_truncation_martingale():
    est = mc.estimate_expectation(srw(5), mc.truncation(100), 10**5, 5)
    assert abs(est.mean - 5) <= 3 * est.half_width_95


def test_example1_means_increase():
    means = [mc.estimate_expectation(example1(1), mc.truncation(m), 20000, 6).mean for m in (10**2, 10**3, 10**4)]
    assert means[0] < means[1] < means[2]


def test_symmetric_occupation_against_two_barrier_oracle():
    b = 1000
    est = mc.estimate_occupation(srw(3), mc.interval_exit(b), 10**5, 7)
    ref = orc.occupation_by_fundamental_matrix(orc.TruncatedChainModel.from_spec(srw(3), b, exact=False), 3)
    for n in (1, 2, 3, 10, 100):
        assert abs(est.profile.values[n] - ref.values[n]) <= 4 * est.profile.half_widths[n]
    assert ref.values[2] == pytest.approx(4 * (1 - 3 / b))


def test_example1_occupation_against_evolution():
    m = 10**4
    est = mc.estimate_occupation(example1(1), mc.truncation(m), 10**5, 8)
    model = orc.TruncatedChainModel.from_spec(example1(1), m + 2, exact=False)
    ref = orc.evolve_distribution(model, 1, m).occupation
    for n in (1, 2, 5):
        assert abs(est.profile.values[n] - ref[n]) <= 4 * est.profile.half_widths[n]
    # the one-barrier value 3 is approached slowly in m
    assert 2.4 < ref[1] < 3


def test_determinism_across_workers():
    rule = mc.truncation(500)
    a = mc.estimate_expectation(ec2(2), rule, 5001, 11, workers=1)
    b = mc.estimate_expectation(ec2(2), rule, 5001, 11, workers=8)
    c = mc.estimate_expectation(ec2(2), rule, 5001, 11, workers=3)
    assert (a.mean, a.half_width_95) == (b.mean, b.half_width_95) == (c.mean, c.half_width_95)
    o1 = mc.estimate_occupation(ec2(2), rule, 3000, 11, workers=1)
    o8 = mc.estimate_occupation(ec2(2), rule, 3000, 11, workers=8)
    assert o1.profile.values == o8.profile.values
    assert o1.profile.half_widths == o8.profile.half_widths


def test_seed_changes_result():
    a = mc.estimate_expectation(ec2(2), mc.truncation(100), 2000, 1)
    b = mc.estimate_expectation(ec2(2), mc.truncation(100), 2000, 2)
    assert a.mean != b.mean


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([srw(4), example1(1), mirrored(2), ec2(2), drift(3)]),
       st.integers(0, 400), st.integers(0, 2**64 - 1), st.integers(0, 10**6),
       st.one_of(st.none(), st.integers(1, 30)))
def test_pathwise_consistency(spec, m, seed, index, b_offset):
    rule = mc.truncation(m) if b_offset is None else mc.truncated_interval_exit(m, spec.k + b_offset)
    rec = mc.simulate_path(spec, rule, seed, index)
    assert rec.terminal_state == spec.k + rec.right_steps - rec.left_steps
    assert rec.stopping_time == rec.right_steps + rec.left_steps <= m
    assert sum(rec.visits.values()) == rec.stopping_time
    assert all(n >= 1 for n in rec.visits)
    if rec.stopping_time < m:
        assert rec.terminal_state in (0, rule.b)


def test_simulate_path_is_independent_of_block():
    spec = example1(2)
    rule = mc.truncation(300)
    rec = mc.simulate_path(spec, rule, 99, 17)
    _, terminal, rights, _, _, _ = mc._run(spec, rule, 40, 99, False, 4, mc.DEFAULT_CAP)
    assert (terminal[17], rights[17]) == (rec.terminal_state, rec.right_steps)


def test_truncation_family_monotone_on_fixed_path():
    spec = ec2(2)
    for index in range(20):
        times = [mc.simulate_path(spec, mc.truncation(m), 5, index).stopping_time for m in (0, 1, 5, 20, 100, 1000, 10**5)]
        assert times == sorted(times)
        final = mc.simulate_path(spec, mc.truncation(10**5), 5, index)
        assert final.terminal_state == 0


def test_cap_hits_are_excluded_and_counted():
    est = mc.estimate_expectation(srw(2), mc.truncation(10**6), 200, 1, cap=6)
    assert est.cap_hits == 200 - est.paths and 0 < est.cap_hits < 200
    none_left = mc.estimate_expectation(srw(5), mc.truncation(10**6), 50, 1, cap=3)
    assert none_left.paths == 0 and np.isnan(none_left.mean)


@pytest.mark.slow
def test_estimator_agrees_with_oracle_in_95_of_100_seeds():
    spec, m = ec2(2), 50
    target = exact_mean(spec, m)
    hits = 0
    for seed in range(100):
        est = mc.estimate_expectation(spec, mc.truncation(m), 4000, seed)
        hits += abs(est.mean - target) <= 4 * est.half_width_95
    assert hits >= 95


def test_sweep_symmetric():
    sw = mc.convergence_sweep(srw(5), "truncation", [1, 10, 100, 1000], 20000, 42)
    assert sw.analytic_limit.value == 5
    for est in sw.estimates:
        assert abs(est.mean - 5) <= 3 * est.half_width_95


def test_sweep_eventually_constant():
    sw = mc.convergence_sweep(ec2(2), "truncation", [10, 10**2, 10**3, 10**4], 20000, 42)
    assert sw.analytic_limit.value == F(3, 2)
    means = [e.mean for e in sw.estimates]
    # starts at k = 2 and drifts down toward the limit
    assert means[0] > means[-1]
    assert abs(means[-1] - 1.5) <= 3 * sw.estimates[-1].half_width_95


def test_sweep_mirrored_goes_to_zero():
    sw = mc.convergence_sweep(mirrored(1), "truncation", [10**2, 10**3, 10**4], 20000, 42)
    assert sw.analytic_limit.value == 0
    means = [e.mean for e in sw.estimates]
    assert means[0] > means[1] > means[2] and means[2] < 0.05


def test_sweep_transient_limit_is_infinite():
    sw = mc.convergence_sweep(drift(1), "truncation", [5, 10], 100, 1)
    assert isinstance(sw.analytic_limit, Extended) and sw.analytic_limit.is_infinite


def test_sweep_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        mc.convergence_sweep(srw(5), "truncation", [10, 10], 10, 1)
