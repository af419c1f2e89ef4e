import math

import numpy as np
import pytest
from scipy import linalg

from holoisac import uplink as ul
from holoisac.array import ArrayConfig
from holoisac.channels import correlation_model, sample_comm_channel, sensing_channel
from holoisac.exceptions import DomainError


@pytest.fixture(scope="module")
def small(params):
    cfg = ArrayConfig(n_x=6, n_y=6)
    return cfg, correlation_model(cfg, params), sensing_channel(cfg, params)


def _top(ev, n):
    return np.sort(np.real(ev))[::-1][:n]


def test_theta_matches_dense(small, params):
    cfg, model, hs = small
    c = ul._c_up(hs, params)
    Rh = linalg.sqrtm(model.dense())
    N = cfg.n_total
    th = model.dense() + c * Rh @ (hs.norm_sq * np.eye(N) - np.outer(hs.h, hs.h.conj())) @ Rh
    assert np.allclose(ul.theta_eigs(model, hs, params), _top(np.linalg.eigvalsh(th), model.n),
                       rtol=1e-7, atol=1e-9 * np.abs(th).max())


def test_phi_matches_dense(small, params):
    cfg, model, hs = small
    cp = ul._c_prime(hs, params)
    Rh = linalg.sqrtm(model.dense())
    M = np.eye(cfg.n_total) + cp * np.outer(hs.h, hs.h.conj())
    phi = Rh @ np.linalg.inv(M) @ Rh
    got = ul.phi_eigs(model, hs, params)
    assert np.allclose(got, _top(np.linalg.eigvalsh(phi), len(got)), rtol=1e-7)


def test_cc_sic_avg_sr_vs_sampling(model, hs, params):
    rng = np.random.default_rng(11)
    h = sample_comm_channel(model, rng, size=4000)
    sr = np.array([ul.cc_sic_sr_instantaneous(x, hs, params) for x in h])
    closed = ul.cc_sic_avg_sr(model, hs, params)
    assert sr.mean() == pytest.approx(closed, abs=4 * sr.std() / math.sqrt(len(sr)) + 1e-12)
    # without a user the echo is interference-free
    zero = params.with_(p_c=0.0)
    assert ul.cc_sic_avg_sr(model, hs, zero) == pytest.approx(
        math.log2(ul.psi_factor(hs, zero)) / params.frame_len)


def test_sc_sic_ecr_vs_sampling(model, hs, params):
    rng = np.random.default_rng(12)
    h = sample_comm_channel(model, rng, size=20000)
    cp = ul._c_prime(hs, params)
    k = cp / (1 + cp * hs.norm_sq)
    # h^H M^{-1} h by Sherman-Morrison
    q = np.sum(np.abs(h) ** 2, axis=1) - k * np.abs(h @ hs.h.conj()) ** 2
    cr = np.log2(1 + params.p_c / params.sigma2_u * q)
    assert cr.mean() == pytest.approx(ul.sc_sic_ecr(model, hs, params), abs=4 * cr.std() / math.sqrt(len(cr)))
    op = np.mean(cr < params.r0)
    ref = ul.sc_sic_op(model, hs, params)
    assert op == pytest.approx(ref, abs=4 * math.sqrt(max(ref * (1 - ref), 1e-6) / len(cr)))


def test_scsi_detection_vector(small, params):
    cfg, model, hs = small
    v, kap = ul.scsi_detection_vector(model, hs, params)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    cp = ul._c_prime(hs, params)
    M = np.eye(cfg.n_total) + cp * np.outer(hs.h, hs.h.conj())
    R = model.dense()
    top = linalg.eigh(R, M, eigvals_only=True)[-1]
    assert kap == pytest.approx(top, rel=1e-8)
    ratio = np.real(np.vdot(v, R @ v) / np.vdot(v, M @ v))
    assert ratio == pytest.approx(kap, rel=1e-8)


def test_quad_inv_dense(small, params):
    cfg, model, hs = small
    A = params.p_c * model.dense() + params.sigma2_u * np.eye(cfg.n_total)
    ref = np.real(np.vdot(hs.h, np.linalg.solve(A, hs.h)))
    assert ul._quad_inv(model, hs, params) == pytest.approx(ref, rel=1e-9)


def test_highsnr_forms(cfg, model, hs, params):
    hi = params.with_(p_c=1e6, p_s=1e6)
    assert ul.sc_sic_ecr(model, hs, hi) == pytest.approx(ul.sc_sic_ecr_highsnr(model, hs, hi), abs=1e-4)
    assert ul.sc_sic_sr(hi, cfg) == pytest.approx(ul.sc_sic_sr_highsnr(hi, cfg), abs=1e-6)
    assert ul.scsi_cc_sic_sr(model, hs, hi) == pytest.approx(ul.scsi_cc_sic_sr_highsnr(model, hs, hi), abs=1e-6)
    assert ul.cc_sic_avg_sr(model, hs, hi) == pytest.approx(ul.cc_sic_avg_sr_highsnr(model, hs, hi), abs=1e-3)
    _, kap = ul.scsi_detection_vector(model, hs, hi)
    ex = ul.scsi_sc_comm(kap, hi)
    ap = ul.scsi_sc_comm_highsnr(kap, hi)
    assert ex[0] == pytest.approx(ap[0], abs=1e-4) and ex[1] == pytest.approx(ap[1], rel=1e-3)


def test_interference_and_time_sharing(params):
    q = ul.apply_interference(params, 2.0)
    assert q.sigma2_u == pytest.approx(3 * params.sigma2_u) and q.varrho == 0.0
    with pytest.raises(DomainError):
        ul.apply_interference(params, -1.0)
    assert ul.time_sharing_pair(1.0, (1, 2), (3, 4)) == (1, 2)
    assert ul.time_sharing_pair(0.0, (1, 2), (3, 4)) == (3, 4)
    with pytest.raises(DomainError):
        ul.time_sharing_pair(2.0, (1, 2), (3, 4))


def test_corner_pairs(cfg, model, hs, params):
    for csi in ("icsi", "scsi"):
        sc, cc = ul.uplink_corner_pairs(model, hs, params, cfg, csi)
        # s-c order favours sensing, c-c order favours communication
        assert sc[0] > cc[0] and cc[1] >= sc[1] - 1e-9
    with pytest.raises(DomainError):
        ul.uplink_corner_pairs(model, hs, params, cfg, "x")


def test_fdsac_uplink(model, hs, params):
    sr, cr = ul.fdsac_uplink(model, hs, params)
    assert sr > 0 and cr > 0
    assert ul.fdsac_uplink(model, hs, params, kappa=0.0)[1] == 0.0
    assert ul.fdsac_uplink(model, hs, params, kappa=1.0)[0] == 0.0
    assert ul.fdsac_uplink(model, hs, params, "scsi")[1] < cr
    hi = params.with_(p_c=1e7, p_s=1e7)
    for csi in ("icsi", "scsi"):
        assert ul.fdsac_uplink(model, hs, hi, csi) == pytest.approx(
            ul.fdsac_uplink_highsnr(model, hs, hi, csi), abs=1e-3)
