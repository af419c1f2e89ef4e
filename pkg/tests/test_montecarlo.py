import math

import numpy as np
import pytest

from holoisac.downlink import sc_op, sensing_gain
from holoisac.exceptions import DomainError
from holoisac.montecarlo import (McConfig, NonFiniteSample, block_rng, estimate_ecr, estimate_op,
                                 mmse_sr_equivalence, run_blocks, stream_id, z_score)
from holoisac.special import exp_integral_ei, LOG2E


def expo(rng, n):
    return rng.standard_exponential(n)


def test_config_rules():
    with pytest.raises(DomainError):
        McConfig(trials=50)
    with pytest.raises(DomainError):
        McConfig(workers=0)


def test_constant_rate():
    m, se = estimate_ecr(expo, lambda x: np.full_like(x, 2.5), McConfig(trials=1000))
    assert (m, se) == (2.5, 0.0)


def test_exponential_kernel():
    mc = McConfig(trials=100_000)
    m, se = estimate_ecr(expo, lambda x: np.log2(1 + 10 * x), mc)
    ref = -math.exp(0.1) * exp_integral_ei(-0.1) * LOG2E
    assert abs(m - ref) < 3 * se


def test_se_scaling():
    _, s1 = estimate_ecr(expo, np.log1p, McConfig(trials=20_000))
    _, s2 = estimate_ecr(expo, np.log1p, McConfig(trials=40_000))
    assert (s1 / s2) / math.sqrt(2) == pytest.approx(1.0, abs=0.2)


def test_op_limits():
    mc = McConfig(trials=1000)
    assert estimate_op(expo, lambda x: x, 0.0, mc)[0] == 0.0
    assert estimate_op(expo, lambda x: x, math.inf, mc)[0] == 1.0


def test_sc_downlink_op(model, hs, params):
    mc = McConfig(trials=100_000)
    u = hs.h.conj() / np.linalg.norm(hs.h)

    def sampler(rng, n):
        from holoisac.channels import sample_comm_channel
        return np.abs(sample_comm_channel(model, rng, n) @ u) ** 2

    ref = sc_op(params, model, hs)
    f, se = estimate_op(sampler, lambda g: np.log2(1 + params.p * g), params.r0, mc, p_ref=ref)
    assert abs(z_score(ref, f, se)) < 3


def test_nonfinite_reports_index():
    def bad(rng, n):
        x = np.ones(n)
        x[7] = np.nan
        return x
    with pytest.raises(NonFiniteSample) as ei:
        run_blocks(bad, McConfig(trials=200, block=100), "bad")
    assert ei.value.index == 7


def test_worker_independence():
    a = run_blocks(expo, McConfig(trials=25_000, workers=1, block=1000), "s")
    b = run_blocks(expo, McConfig(trials=25_000, workers=4, block=1000), "s")
    assert np.array_equal(a, b)
    c = run_blocks(expo, McConfig(trials=25_000, seed=43, block=1000), "s")
    assert not np.array_equal(a, c)


def test_streams_distinct():
    assert stream_id("a") != stream_id("b")
    x = block_rng(1, stream_id("a"), 0).standard_normal(4)
    y = block_rng(1, stream_id("a"), 1).standard_normal(4)
    assert not np.allclose(x, y)


def test_z_score_edge_cases():
    assert z_score(1.0, 1.0, 0.0) == 0.0
    assert z_score(1.0, 2.0, 0.0) == math.inf
    assert z_score(1.0, 1.5, 0.25) == pytest.approx(2.0)


def test_mmse_equivalence(hs, params):
    rep = mmse_sr_equivalence(hs, params, probes=100)
    assert rep["pass"] and rep["kendall_tau"] == 1.0 and rep["pair_disagreements"] == 0
    assert rep["orthogonal_sr"] == pytest.approx(0.0, abs=1e-12)
    assert rep["orthogonal_mse"] == pytest.approx(params.alpha_s)
    c = sensing_gain(hs, params) * hs.norm_sq
    assert rep["matched_mse"] == pytest.approx(params.alpha_s / (1 + c), rel=1e-12)


def test_z_score_rounding_floor():
    # a constant sample can carry a rounding-level spread; that is not a mismatch
    assert z_score(3.887, 3.887 + 4e-16, 2.8e-18) == 0.0
    assert z_score(3.887, 3.9, 2.8e-18) > 1e6
