import math

import numpy as np
import pytest
from scipy import linalg

from holoisac import downlink as dl
from holoisac.array import ArrayConfig
from holoisac.channels import correlation_model, sample_comm_channel, sensing_channel
from holoisac.exceptions import DomainError


@pytest.fixture(scope="module")
def small(params):
    cfg = ArrayConfig(n_x=6, n_y=6)
    return cfg, correlation_model(cfg, params), sensing_channel(cfg, params)


def test_sc_sr_example(cfg, params):
    # 3 m above the array centre
    p3 = params.with_(r_target=(cfg.center[0], cfg.center[1], 3.0))
    ref = 0.25 * math.log2(1 + 4e3 * (400 / (36 * math.pi)) ** 2)
    assert dl.sc_sr_closed(p3, cfg) == pytest.approx(ref, rel=1e-12)
    assert dl.sc_sr_closed(p3, cfg) == pytest.approx(3.90, abs=5e-3)


def test_sc_sr_matches_matched_beam(cfg, params, hs):
    w = hs.h.conj() / np.linalg.norm(hs.h)
    assert dl.sr_instantaneous(w, hs, params) == pytest.approx(dl.sc_sr_closed(params, cfg), rel=1e-12)
    assert dl.sc_sr_aor(params, cfg) == pytest.approx(dl.sc_sr_closed(params, cfg), rel=1e-12)
    assert dl.sc_sr_bound(params, cfg) > dl.sc_sr_closed(params, cfg)


def test_mmse_matches_rate(hs, params):
    w = hs.h.conj() / np.linalg.norm(hs.h)
    m = dl.mmse_of_beam(w, hs, params)
    sr = dl.sr_instantaneous(w, hs, params)
    assert m == pytest.approx(params.alpha_s * 2 ** (-params.frame_len * sr), rel=1e-12)


def test_compressed_eigs_match_dense(small, params):
    cfg, model, hs = small
    alpha, beta = 1.0, 3.7
    R = model.dense()
    Rh = linalg.sqrtm(R)
    full = np.linalg.eigvalsh(Rh @ (alpha * np.eye(cfg.n_total) + beta * np.outer(hs.h, hs.h.conj())) @ Rh)
    full = np.sort(full)[::-1][:model.n]
    comp = dl.compressed_rank_one_eigs(model, dl.subspace_coords(model, hs), alpha, beta)
    assert np.allclose(comp, full, rtol=1e-8, atol=1e-8 * full.max())


def test_sc_closed_forms_vs_sampling(model, hs, params):
    rng = np.random.default_rng(3)
    h = sample_comm_channel(model, rng, size=40000)
    u = hs.h.conj() / np.linalg.norm(hs.h)
    g = np.abs(h @ u) ** 2
    cr = np.log2(1 + params.p / params.sigma2_c * g)
    assert cr.mean() == pytest.approx(dl.sc_ecr(params, model, hs), abs=4 * cr.std() / 200)
    op = np.mean(cr < params.r0)
    assert op == pytest.approx(dl.sc_op(params, model, hs), abs=4 * math.sqrt(op * (1 - op) / 40000))


def test_cc_ecr_vs_sampling(model, params):
    rng = np.random.default_rng(4)
    h = sample_comm_channel(model, rng, size=20000)
    cr = np.log2(1 + params.p / params.sigma2_c * np.sum(np.abs(h) ** 2, axis=1))
    assert cr.mean() == pytest.approx(dl.cc_ecr(params, model.eigs), abs=4 * cr.std() / math.sqrt(20000))


def test_cc_op_two_eigs():
    # X = 2 E1 + E2: P(X < x) = 1 - 2 e^{-x/2} + e^{-x}
    p = dl.ScenarioParams(p=1.0, r0=1.0)
    x = 1.0
    assert dl.cc_op(p, [2.0, 1.0]) == pytest.approx(1 - 2 * math.exp(-x / 2) + math.exp(-x), rel=1e-10)
    assert math.exp(dl.cc_log_op(p, [2.0, 1.0])) == pytest.approx(dl.cc_op(p, [2.0, 1.0]), rel=1e-12)


def test_cc_op_asymptote_converges():
    p = dl.ScenarioParams(p=1e7)
    eigs = [3.0, 2.0, 1.0]
    assert dl.cc_log_op(p, eigs) == pytest.approx(dl.cc_log_op_asymptote(p, eigs), abs=1e-2)


def test_highsnr_gaps_shrink(cfg, model, hs, params):
    hi = params.with_(p=1e6, p_c=1e6)
    assert abs(dl.cc_ecr(hi, model.eigs) - dl.cc_ecr_highsnr(hi, model.eigs)) < 1e-4
    assert abs(dl.sc_ecr(hi, model, hs) - dl.sc_ecr_highsnr(hi, model, hs)) < 1e-4
    assert abs(dl.cc_avg_sr(hi, model, hs) - dl.cc_avg_sr_highsnr(hi, cfg, model, hs)) < 1e-3
    assert dl.sc_op_asymptote(hi, model, hs) == pytest.approx(dl.sc_op(hi, model, hs), rel=1e-3)


def test_cc_avg_sr_vs_sampling(model, hs, params):
    rng = np.random.default_rng(5)
    h = sample_comm_channel(model, rng, size=20000)
    w = h.conj() / np.linalg.norm(h, axis=1, keepdims=True)
    g = np.abs(w @ hs.h) ** 2
    sr = np.log2(1 + dl.sensing_gain(hs, params) * g) / params.frame_len
    assert sr.mean() == pytest.approx(dl.cc_avg_sr(params, model, hs), abs=4 * sr.std() / math.sqrt(20000))
    assert dl.cc_avg_sr(params.with_(p=0.0), model, hs) == 0.0


def test_pareto_endpoints_and_monotone(model, hs, params):
    rng = np.random.default_rng(6)
    h_c = sample_comm_channel(model, rng)
    taus = np.linspace(0, 1, 21)
    res = [dl.pareto_beamformer(t, h_c, hs, params) for t in taus]
    n1 = params.p / params.sigma2_c * np.real(np.vdot(h_c, h_c))
    assert res[0].cr == pytest.approx(math.log2(1 + n1), rel=1e-10)
    assert res[-1].sr == pytest.approx(dl.sc_sr_closed(params, dl.ArrayConfig()), rel=1e-10)
    sr = np.array([r.sr for r in res])
    cr = np.array([r.cr for r in res])
    assert np.all(np.diff(sr) >= -1e-10) and np.all(np.diff(cr) <= 1e-10)
    for r in res:
        assert np.linalg.norm(r.w) == pytest.approx(1.0)
        if r.diagnostics["case"] == "interior":
            assert abs(r.diagnostics["residual"]) < 1e-9
            assert min(r.sr / r.tau, r.cr / (1 - r.tau)) == pytest.approx(r.r_star, rel=1e-8)


def test_pareto_batch_matches_single(model, hs, params):
    rng = np.random.default_rng(8)
    h_c = sample_comm_channel(model, rng)
    one = dl.pareto_beamformer(0.3, h_c, hs, params)
    h1 = math.sqrt(params.p) * h_c
    h2 = math.sqrt(dl.sensing_gain(hs, params)) * hs.h
    batch = dl.pareto_solve(0.3, np.vdot(h1, h1).real, np.vdot(h2, h2).real, abs(np.vdot(h1, h2)),
                            params.frame_len)
    assert batch.sr[0] == pytest.approx(one.sr, rel=1e-10)
    assert batch.cr[0] == pytest.approx(one.cr, rel=1e-10)
    with pytest.raises(DomainError):
        dl.pareto_solve(1.5, 1.0, 1.0, 0.1, 4)


def test_scsi_beam(cfg, model, hs, params):
    w, idx, lam1 = dl.scsi_cc_beamformer(model)
    assert lam1 == pytest.approx(model.eigs[0])
    assert np.allclose(w, model.U[:, idx].conj())
    # the plane-wave sensing gain equals the rate of the unit-norm beam
    assert dl.scsi_cc_sr(params, model, hs, cfg) == pytest.approx(dl.sr_instantaneous(w, hs, params), rel=1e-10)
    hi = params.with_(p=1e6)
    assert dl.scsi_cc_ecr(hi, lam1) == pytest.approx(dl.scsi_cc_ecr_highsnr(hi, lam1), abs=1e-4)
    assert dl.scsi_cc_op(hi, lam1) == pytest.approx(dl.scsi_cc_op_asymptote(hi, lam1), rel=1e-3)


def test_fdsac(model, hs, params):
    sr, cr = dl.fdsac_downlink(params, hs, "icsi", model)
    assert sr > 0 and cr > 0
    assert dl.fdsac_downlink(params, hs, "icsi", model, kappa=0.0)[1] == 0.0
    assert dl.fdsac_downlink(params, hs, "icsi", model, kappa=1.0)[0] == 0.0
    _, cr_s = dl.fdsac_downlink(params, hs, "scsi", model)
    assert cr_s < cr
    hi = params.with_(p=1e7)
    for csi in ("icsi", "scsi"):
        ex = dl.fdsac_downlink(hi, hs, csi, model)
        ap = dl.fdsac_downlink_highsnr(hi, hs, csi, model)
        assert ex == pytest.approx(ap, abs=1e-3)
    with pytest.raises(DomainError):
        dl.fdsac_downlink(params, hs, "bogus", model)
    with pytest.raises(DomainError):
        dl.fdsac_downlink(params, hs, "icsi")


def test_asymptotics_fit():
    rep = dl.asymptotics(rate_fn=lambda p: 0.25 * math.log2(3 * p),
                         log_op_fn=lambda p: math.log(5.0) - 2 * math.log(p))
    assert rep.slope == pytest.approx(0.25)
    assert rep.diversity == pytest.approx(2.0)
    bad = dl.asymptotics(log_op_fn=lambda p: -1e4)
    assert bad.diversity is None and bad.notes


def test_gamma_two_ways(cfg, model, hs, params):
    # element-wise phase sum against the inner-product form
    _, idx, _ = dl.scsi_cc_beamformer(model)
    a = model.U[:, idx]
    n = cfg.n_total
    pref = params.frame_len * params.alpha_s * params.alpha0 ** 2 / (16 * math.pi ** 2 * hs.r_s ** 4)
    inner = pref * n * abs(np.vdot(a, hs.b)) ** 2
    assert dl.gamma_scsi(params, cfg, model, hs) == pytest.approx(inner, rel=1e-10)
