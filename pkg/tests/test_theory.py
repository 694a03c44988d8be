import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_orthonormal
from fwsparse.dictionary import analyze
from fwsparse.exceptions import ConditionViolated, MismatchedTrace
from fwsparse.pursuit import FwConfig, fw_solve
from fwsparse.synth import SynthConfig, gen_dictionary, gen_instance, make_instance
from fwsparse.theory import (
    beta_threshold,
    contraction_ratios,
    detect_k,
    epsilon,
    first_iter_rate,
    iterate_l1_bound,
    log_bound_line,
    tau,
    theta,
    validate_trace,
)


def test_theta_examples():
    assert theta(0.0, 1, 1.0, 2.0) == 1 / 64
    assert theta(0.5, 4, 1.0, 8.0) == 0.0059814453125
    assert theta(0.3, 3, 2.5, 2.5) == 0.0


def test_theta_errors():
    with pytest.raises(ConditionViolated):
        theta(1.0, 2, 1.0, 2.0)
    with pytest.raises(ConditionViolated):
        theta(0.1, 2, 3.0, 2.0)


def test_beta_threshold_examples():
    assert beta_threshold(1.0, 1, 0.0) == 2.0
    assert beta_threshold(1.0, 4, 0.75) == 8.0
    with pytest.raises(ConditionViolated):
        beta_threshold(1.0, 2, 1.2)


def test_iterate_bound_equals_threshold():
    assert iterate_l1_bound(1.0, 1, 0.0) == 2.0
    for y, m, mu in [(0.3, 2, 0.1), (7.0, 5, 0.6), (1e-3, 1, 0.0)]:
        assert iterate_l1_bound(y, m, mu) == beta_threshold(y, m, mu)


def test_first_iter_rate_examples():
    t = tau(1.0, 1, 0.0, 4.0)
    assert t == 0.5
    assert first_iter_rate(0.0, 1, t) == 1 / 16
    assert first_iter_rate(0.2, 3, 1.0) == 0.0
    with pytest.raises(ConditionViolated):
        first_iter_rate(0.2, 3, 1.5)


@settings(max_examples=50)
@given(st.floats(0.0, 10.0), st.floats(1e-6, 10.0))
def test_epsilon_sign(x_l1, beta):
    assert (epsilon(x_l1, beta) > 0) == (x_l1 < beta)


def test_theta_monotone():
    rng = np.random.default_rng(20)
    h = 1e-6
    for _ in range(20):
        mu = rng.uniform(0.0, 0.9)
        m = int(rng.integers(1, 20))
        x = rng.uniform(0.1, 5.0)
        beta = x * rng.uniform(1.1, 20.0)
        base = theta(mu, m, x, beta)
        assert theta(mu, m, x, beta + h) >= base
        assert theta(mu + h, m, x, beta) <= base
        assert theta(mu, m + 1, x, beta) <= base


def test_log_bound_line():
    line = log_bound_line(2.0, 0.19, [0, 1, 2])
    assert line[0] == math.log(2.0)
    assert line[2] - line[0] == pytest.approx(math.log(0.81))


def test_detect_k():
    valid = np.ones(5, dtype=bool)
    assert detect_k(np.array([0.1, 0.2, 0.1, 0.2, 0.1]), valid, 0.5) == 0
    assert detect_k(np.array([0.9, 0.95, 0.1, 0.2, 0.1]), valid, 0.5) == 2
    assert detect_k(np.array([0.1, 0.2, 0.1, 0.2, 0.9]), valid, 0.5) is None
    masked = np.array([True, True, True, False, False])
    assert detect_k(np.array([0.9, 0.1, 0.1, np.nan, np.nan]), masked, 0.5) == 1


def test_orthonormal_one_step_report():
    D = random_orthonormal(4, 1)
    inst = make_instance(D, [0.0, 0.0, -0.8, 0.0])
    metrics = analyze(D)
    tr = fw_solve(D, inst.signal, FwConfig(beta=2.0))
    rep = validate_trace(tr, inst, metrics, 2.0)
    assert rep.recovery_ok and rep.K_detected == 0 and rep.support_confined
    assert rep.iterate_bound_ok and rep.first_iter_ok
    assert rep.beta_threshold == pytest.approx(1.6)
    assert rep.k_epsilon is not None


@pytest.fixture(scope="module")
def reports():
    out = []
    for t in range(10):
        D = gen_dictionary(SynthConfig(200, 400, 1, dict_seed=300 + t))
        metrics = analyze(D)
        cfg = SynthConfig(200, 400, metrics.m_star, dict_seed=300 + t, signal_seed=700 + t)
        inst = gen_instance(D, cfg)
        beta = 8 * inst.l1_coeff_norm
        tr = fw_solve(D, inst.signal, FwConfig(beta=beta, max_iters=300))
        out.append((D, metrics, inst, tr, validate_trace(tr, inst, metrics, beta)))
    return out


def test_seeded_reports(reports):
    for _, _, _, tr, rep in reports:
        assert rep.support_confined and rep.off_support_selections == 0
        assert rep.K_detected is not None and rep.K_detected <= tr.n_iter
        assert rep.iterate_bound_ok


def test_tail_below_rate_line(reports):
    for _, _, _, tr, rep in reports:
        K = rep.K_detected
        rn = tr.residual_norms()
        keep = rn >= 1e-13 * tr.signal_norm
        ks = np.arange(K, rn.size)
        line = np.log(rn[K]) + 0.5 * (ks - K) * np.log1p(-rep.theta)
        tail = keep[K:]
        assert np.all(np.log(rn[K:][tail]) <= line[tail] + 1e-9)


def test_first_iteration_rate_above_threshold(reports):
    for D, metrics, inst, _, rep in reports:
        beta = 1.01 * rep.beta_threshold
        tr = fw_solve(D, inst.signal, FwConfig(beta=beta, max_iters=300))
        r2 = validate_trace(tr, inst, metrics, beta)
        assert r2.first_iter_ok is True
        ratios, valid = contraction_ratios(tr)
        assert np.all(ratios[valid] <= 1 - r2.theta_first_iter + 1e-12)


def test_threshold_dominates_l1_norm():
    # ||x*||_1 <= ||y|| sqrt(m / (1 - mu1(m-1))) < threshold
    for t in range(100):
        D = gen_dictionary(SynthConfig(40, 80, 1, dict_seed=t))
        metrics = analyze(D, m_max=3)
        m = min(metrics.m_star, 3) or 1
        inst = gen_instance(D, SynthConfig(40, 80, m, dict_seed=t, signal_seed=t + 1000))
        mu1 = metrics.mu1(m - 1)
        if mu1 >= 1:
            continue
        assert beta_threshold(inst.l2_signal_norm, m, mu1) >= inst.l1_coeff_norm


def test_report_json(reports):
    rep = reports[0][4]
    rec = json.loads(rep.to_json(dict_seed=300, signal_seed=700))
    assert rec["inputs"] == {"dict_seed": 300, "signal_seed": 700}
    assert rec["K_detected"] == rep.K_detected


def test_mismatched_trace(reports):
    D, metrics, inst, tr, _ = reports[0]
    other = reports[1][2]
    with pytest.raises(MismatchedTrace):
        validate_trace(tr, other, metrics, 1.0)
