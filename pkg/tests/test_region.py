import numpy as np
import pytest

from holoisac import region as rg
from holoisac import uplink as ul
from holoisac.channels import sample_hbar
from holoisac.downlink import pareto_beamformer, sc_sr_closed
from holoisac.exceptions import DomainError


def _pt(sr, cr, se=0.0):
    return rg.RegionPoint(sr, cr, None, "t", se, se)


def test_pareto_filter():
    pts = [_pt(0, 3), _pt(1, 2), _pt(0.5, 1), _pt(2, 0), _pt(1, 1.5)]
    b = rg.pareto_filter(pts)
    assert [(p.sr, p.cr) for p in b] == [(0, 3), (1, 2), (2, 0)]


def test_containment_detects_violation():
    outer = rg.RateRegion([_pt(0, 2), _pt(1, 1), _pt(2, 0)])
    inside = rg.RateRegion([_pt(0.5, 1.4), _pt(1.5, 0.4)])
    outside = rg.RateRegion([_pt(1, 1.6)])
    assert rg.check_containment(inside, outer).ok
    rep = rg.check_containment(outside, outer)
    assert not rep.ok and rep.checked == 1
    # staircase reading is stricter than the time-sharing hull
    assert not rg.check_containment(rg.RateRegion([_pt(0.5, 1.4)]), outer, hull=False).ok
    # slack from standard errors can absorb a small excursion
    assert rg.check_containment(rg.RateRegion([_pt(1, 1.05, 0.02)]), outer).ok


def test_draw_scalars_match_antenna_domain(model, hs, params):
    rng = np.random.default_rng(21)
    hbar = sample_hbar(model, rng, 5)
    ds = rg.draw_scalars(model, hs, params, hbar)
    h_c = (hbar * np.sqrt(model.eigs)) @ model.U.T
    for i in range(5):
        r = pareto_beamformer(0.4, h_c[i], hs, params)
        batch = rg.pareto_solve(0.4, ds.n1[i:i + 1], ds.n2, ds.rho[i:i + 1], params.frame_len)
        assert batch.sr[0] == pytest.approx(r.sr, rel=1e-10)
        assert batch.cr[0] == pytest.approx(r.cr, rel=1e-10)


def test_icsi_region_shape(cfg, model, hs, params):
    grid = np.linspace(0, 1, 11)
    reg = rg.downlink_region_icsi(model, hs, params, grid, trials=300)
    assert len(reg.points) == 11 and reg.meta["failures"] == 0
    assert np.all(np.diff(reg.sr) >= -1e-12) and np.all(np.diff(reg.cr) <= 1e-12)
    assert reg.sr[-1] == pytest.approx(sc_sr_closed(params, cfg), rel=1e-10)
    assert reg.meta["max_c13_residual"] < 1e-9


def test_relaxed_solution(model, hs):
    sol = rg.scsi_relaxed_solve(model, hs, 0.5)
    x = np.linalg.eigh(sol.W)[1][:, -1]
    qh = np.real(np.vdot(x, sol.H @ x)) / 0.5
    qr = np.real(np.vdot(x, sol.R @ x)) / 0.5
    assert np.real(np.trace(sol.W)) == pytest.approx(1.0)
    assert min(qh, qr) == pytest.approx(sol.x_star, rel=1e-6)
    with pytest.raises(DomainError):
        rg.scsi_relaxed_solve(model, hs, 0.0)


def test_scsi_region(model, hs, params):
    grid = [0.0, 0.25, 0.5, 0.75, 1.0]
    reg = rg.downlink_region_scsi(model, hs, params, grid, M=2000)
    assert reg.meta["min_sdr_ratio"] >= 0.95
    assert reg.points[0].design == "scsi-cc" and reg.points[-1].design == "scsi-sc"


def test_uplink_and_fdsac_regions(cfg, model, hs, params):
    sc, cc = ul.uplink_corner_pairs(model, hs, params, cfg)
    reg = rg.uplink_region(sc, cc, [0.0, 0.5, 1.0])
    assert (reg.sr[0], reg.cr[0]) == cc and (reg.sr[-1], reg.cr[-1]) == sc
    f = rg.fdsac_region(params, model, hs, [0.0, 0.5, 1.0])
    assert len(f.points) == 9
    assert len(rg.fdsac_region(params, model, hs, [0.2, 0.8], link="uplink").points) == 2
    with pytest.raises(DomainError):
        rg.fdsac_region(params, model, hs, [0.5], link="sideways")


def test_scenario_hash_stable(params):
    assert rg.scenario_hash(params) == rg.scenario_hash(params.with_())
    assert rg.scenario_hash(params) != rg.scenario_hash(params.with_(p=2.0))
