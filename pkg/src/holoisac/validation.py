"""Registry of closed-form vs sampling-oracle pairings and invariant checks.

Every oracle draws the full N-dimensional channel h_c = U Sigma^(1/2) hbar and
evaluates the instantaneous rate directly from antenna-domain vectors, so it
shares no algebra with the subspace reductions used by the closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import downlink as dl
from . import uplink as ul
from .array import ArrayConfig
from .channels import (CorrelatedChannelModel, ScenarioParams, correlation_model,
                       sample_comm_channel, sample_hbar, sample_target_amplitude,
                       sensing_channel)
from .region import draw_scalars
from .montecarlo import McConfig, estimate_ecr, mmse_sr_equivalence, run_blocks, z_score
from .special import SpectralStats

OP_RARE = 1e-3
RARE_TRIALS = 1_000_000


@dataclass
class Pairing:
    metric: str
    closed: Callable[[], float]
    draw: Callable[[np.random.Generator, int], np.ndarray]
    kind: str = "mean"  # "mean", "op" (draw returns indicators) or "delta"
    transform: Optional[Callable[[float], float]] = None


@dataclass
class Scenario:
    cfg: ArrayConfig
    params: ScenarioParams
    model: CorrelatedChannelModel
    hs: object
    cf_model: CorrelatedChannelModel  # model fed to the closed forms


def build_scenario(cfg: Optional[ArrayConfig] = None, params: Optional[ScenarioParams] = None,
                   tamper: float = 1.0,
                   model: Optional[CorrelatedChannelModel] = None) -> Scenario:
    """Defaults plus an optional eigenvalue scaling applied to the closed-form side only."""
    cfg = ArrayConfig() if cfg is None else cfg
    params = ScenarioParams() if params is None else params
    model = correlation_model(cfg, params) if model is None else model
    cf = model if tamper == 1.0 else replace(model, eigs=model.eigs * tamper)
    return Scenario(cfg, params, model, sensing_channel(cfg, params), cf)


def calibrated_r0(stats: SpectralStats, snr: float, target: float = 0.1) -> float:
    """Rate threshold at which a weighted-exponential-sum outage equals ``target``."""
    hi = float(np.sum(stats.eigs)) * 10
    x = brentq(lambda t: stats.cdf(t) - target, 1e-12 * hi, hi, xtol=1e-14 * hi)
    return math.log2(1 + snr * x)


def registry(sc: Scenario) -> list:
    cfg, p, model, hs, cf = sc.cfg, sc.params, sc.model, sc.hs, sc.cf_model
    h = hs.h
    L = p.frame_len
    hc = lambda rng, n: sample_comm_channel(model, rng, n)  # noqa: E731
    snr_c = p.p / p.sigma2_c
    snr_u = p.p_c / p.sigma2_u
    out = []

    def add(metric, closed, draw, kind="mean", transform=None):
        out.append(Pairing(metric, closed, draw, kind, transform))

    # ---- downlink, sensing-centric beam
    w_sc = h.conj() / np.linalg.norm(h)

    def sc_rate(H):
        return np.log2(1 + snr_c * np.abs(H @ w_sc) ** 2)

    sr_sc = dl.sr_instantaneous(w_sc, hs, p)
    add("dl_sc_sr", lambda: dl.sc_sr_closed(p, cfg), lambda r, n: np.full(n, sr_sc))
    add("dl_sc_ecr", lambda: dl.sc_ecr(p, cf, hs), lambda r, n: sc_rate(hc(r, n)))
    add("dl_sc_op", lambda: dl.sc_op(p, cf, hs),
        lambda r, n: sc_rate(hc(r, n)) < p.r0, "op")

    # ---- downlink, communication-centric (MRT) beam
    def nrm2(H):
        return np.sum(np.abs(H) ** 2, axis=1)

    r0_cal = calibrated_r0(SpectralStats(model.eigs), snr_c)
    add("dl_cc_op", lambda: dl.cc_op(p, cf.eigs),
        lambda r, n: np.log2(1 + snr_c * nrm2(hc(r, n))) < p.r0, "op")
    add("dl_cc_op_calibrated", lambda: dl.cc_op(p.with_(r0=r0_cal), cf.eigs),
        lambda r, n: np.log2(1 + snr_c * nrm2(hc(r, n))) < r0_cal, "op")
    add("dl_cc_ecr", lambda: dl.cc_ecr(p, cf.eigs),
        lambda r, n: np.log2(1 + snr_c * nrm2(hc(r, n))))
    c = dl.sensing_gain(hs, p)

    def cc_sr(H):
        return np.log2(1 + c * np.abs(H @ h.conj()) ** 2 / nrm2(H)) / L

    add("dl_cc_avg_sr", lambda: dl.cc_avg_sr(p, cf, hs), lambda r, n: cc_sr(hc(r, n)))

    # ---- downlink, statistical CSI
    w_s, idx, _ = dl.scsi_cc_beamformer(model)
    lam_cf = float(cf.eigs[idx])

    def scsi_rate(H):
        return np.log2(1 + snr_c * np.abs(H @ w_s) ** 2)

    sr_s = dl.sr_instantaneous(w_s, hs, p)
    add("dl_scsi_cc_sr", lambda: dl.scsi_cc_sr(p, cf, hs, cfg), lambda r, n: np.full(n, sr_s))
    add("dl_scsi_cc_ecr", lambda: dl.scsi_cc_ecr(p, lam_cf), lambda r, n: scsi_rate(hc(r, n)))
    add("dl_scsi_cc_op", lambda: dl.scsi_cc_op(p, lam_cf),
        lambda r, n: scsi_rate(hc(r, n)) < p.r0, "op")
    add("dl_scsi_principal_power", lambda: lam_cf,
        lambda r, n: np.abs(hc(r, n) @ w_s) ** 2)

    # ---- downlink FDSAC communication rates
    a_f = p.iota / p.kappa * snr_c
    add("dl_fdsac_icsi_cr", lambda: dl.fdsac_downlink(p, hs, "icsi", cf)[1],
        lambda r, n: p.kappa * np.log2(1 + a_f * nrm2(hc(r, n))))
    add("dl_fdsac_scsi_cr", lambda: dl.fdsac_downlink(p, hs, "scsi", cf)[1],
        lambda r, n: p.kappa * np.log2(1 + a_f * np.abs(hc(r, n) @ w_s) ** 2))

    # ---- uplink, c-c SIC under instantaneous CSI
    hh = hs.norm_sq

    def cc_sic_sr(H):
        ip = np.abs(H @ h.conj()) ** 2
        eff = hh - p.p_c * ip / (p.p_c * nrm2(H) + p.sigma2_u)
        return np.log2(1 + p.p_s * L * p.alpha_s * hh / p.sigma2_u * eff) / L

    add("ul_cc_sic_avg_sr", lambda: ul.cc_sic_avg_sr(cf, hs, p), lambda r, n: cc_sic_sr(hc(r, n)))
    add("ul_cc_sic_ecr", lambda: ul.cc_sic_comm(cf, p)[0],
        lambda r, n: np.log2(1 + snr_u * nrm2(hc(r, n))))
    add("ul_cc_sic_op", lambda: ul.cc_sic_comm(cf, p)[1],
        lambda r, n: np.log2(1 + snr_u * nrm2(hc(r, n))) < p.r0, "op")

    # ---- uplink, s-c SIC under instantaneous CSI (MMSE detection, echo as interference)
    cp = p.p_s / p.sigma2_u * p.alpha_s * hh
    k = cp / (1 + cp * hh)

    def sc_sic_rate(H):
        q = nrm2(H) - k * np.abs(H @ h.conj()) ** 2
        return np.log2(1 + snr_u * q)

    # echo estimated on the user-free signal with the matched filter
    p_up = p.with_(p=p.p_s, sigma2_s=p.sigma2_u)
    sr_up = dl.sr_instantaneous(w_sc, hs, p_up)
    add("ul_sc_sic_sr", lambda: ul.sc_sic_sr(p, cfg), lambda r, n: np.full(n, sr_up))
    st_phi = SpectralStats(ul.phi_eigs(model, hs, p))
    r0_phi = calibrated_r0(st_phi, snr_u)
    add("ul_sc_sic_ecr", lambda: ul.sc_sic_ecr(cf, hs, p), lambda r, n: sc_sic_rate(hc(r, n)))
    add("ul_sc_sic_op", lambda: ul.sc_sic_op(cf, hs, p),
        lambda r, n: sc_sic_rate(hc(r, n)) < p.r0, "op")
    add("ul_sc_sic_op_calibrated", lambda: ul.sc_sic_op(cf, hs, p.with_(r0=r0_phi)),
        lambda r, n: sc_sic_rate(hc(r, n)) < r0_phi, "op")

    # ---- uplink, statistical CSI
    # c-c SIC: echo detected with the user signal as colored noise of covariance p_c R.
    # The oracle measures the interference power along the LMMSE vector by sampling.
    Rg = model.dense()
    v13 = np.linalg.solve(p.p_c * Rg + p.sigma2_u * np.eye(len(h)), h)
    vh = abs(np.vdot(v13, h)) ** 2
    vv = float(np.real(np.vdot(v13, v13)))

    def sr13(m):
        sinr = p.p_s * L * p.alpha_s * hh * vh / (p.p_c * m + p.sigma2_u * vv)
        return math.log2(1 + sinr) / L

    add("ul_scsi_cc_sic_sr", lambda: ul.scsi_cc_sic_sr(cf, hs, p),
        lambda r, n: np.abs(hc(r, n) @ v13.conj()) ** 2, "delta", sr13)

    v14, kap = ul.scsi_detection_vector(model, hs, p)
    _, kap_cf = ul.scsi_detection_vector(cf, hs, p)
    vh14 = abs(np.vdot(v14, h)) ** 2

    def sc14(H):
        return np.log2(1 + p.p_c * np.abs(H @ v14.conj()) ** 2 / (p.sigma2_u * (1 + cp * vh14)))

    add("ul_scsi_sc_sic_ecr", lambda: ul.scsi_sc_comm(kap_cf, p)[0], lambda r, n: sc14(hc(r, n)))
    add("ul_scsi_sc_sic_op", lambda: ul.scsi_sc_comm(kap_cf, p)[1],
        lambda r, n: sc14(hc(r, n)) < p.r0, "op")
    a_n = model.U[:, idx]
    add("ul_scsi_cc_sic_ecr", lambda: ul.scsi_cc_sic_comm(cf, p)[0],
        lambda r, n: np.log2(1 + snr_u * np.abs(hc(r, n) @ a_n.conj()) ** 2))
    add("ul_scsi_cc_sic_op", lambda: ul.scsi_cc_sic_comm(cf, p)[1],
        lambda r, n: np.log2(1 + snr_u * np.abs(hc(r, n) @ a_n.conj()) ** 2) < p.r0, "op")

    # ---- uplink FDSAC
    a_u = p.p_c / (p.kappa * p.sigma2_u)
    add("ul_fdsac_icsi_cr", lambda: ul.fdsac_uplink(cf, hs, p, "icsi")[1],
        lambda r, n: p.kappa * np.log2(1 + a_u * nrm2(hc(r, n))))
    add("ul_fdsac_scsi_cr", lambda: ul.fdsac_uplink(cf, hs, p, "scsi")[1],
        lambda r, n: p.kappa * np.log2(1 + a_u * np.abs(hc(r, n) @ a_n.conj()) ** 2))

    # ---- channel statistics
    add("channel_trace", lambda: cf.trace, lambda r, n: nrm2(hc(r, n)))
    add("target_amplitude_power", lambda: p.alpha_s,
        lambda r, n: np.abs(sample_target_amplitude(p, r, n)) ** 2)
    return out


def evaluate(pair: Pairing, mc: McConfig, rare_trials: Optional[int] = RARE_TRIALS) -> dict:
    """Compare one pairing; OPs below ``OP_RARE`` use ``rare_trials`` draws."""
    closed = float(pair.closed())
    if pair.kind == "op":
        trials = rare_trials if (closed < OP_RARE and rare_trials) else mc.trials
        x = run_blocks(lambda r, n: pair.draw(r, n).astype(float), mc, pair.metric, trials)
        mean = float(x.mean())
        # binomial standard error under the closed-form probability
        se = math.sqrt(max(closed * (1 - closed), 0.0) / x.size)
    elif pair.kind == "delta":
        x = run_blocks(pair.draw, mc, pair.metric)
        m = float(x.mean())
        s = float(x.std(ddof=1) / math.sqrt(x.size))
        eps = 1e-6 * max(abs(m), 1e-300)
        deriv = (pair.transform(m + eps) - pair.transform(m - eps)) / (2 * eps)
        mean, se = pair.transform(m), abs(deriv) * s
        trials = x.size
    else:
        mean, se = estimate_ecr(pair.draw, lambda v: v, mc, pair.metric)
        trials = mc.trials
    z = z_score(closed, mean, se)
    return {"metric": pair.metric, "closed_form": closed, "mc_mean": mean, "mc_se": se,
            "z_score": z, "trials": int(trials), "pass": bool(abs(z) <= mc.ci_z)}


def invariants(sc: Scenario, mc: McConfig) -> list:
    cfg, p, model, hs = sc.cfg, sc.params, sc.model, sc.hs
    res = []
    U = model.U
    err = float(np.max(np.abs(U.conj().T @ U - np.eye(model.n))))
    res.append({"name": "basis_semi_unitary", "value": err, "pass": err < 1e-10})
    n = cfg.n_total
    anchor = p.alpha0 ** 2 * n ** 2 / (16 * math.pi ** 2 * hs.r_s ** 4)
    rel = abs(hs.norm_sq ** 2 - anchor) / anchor
    res.append({"name": "sensing_norm_anchor", "value": rel, "pass": rel < 1e-12})
    rel = abs(dl.sc_sr_closed(p, cfg) - dl.sc_sr_aor(p, cfg)) / dl.sc_sr_closed(p, cfg)
    res.append({"name": "aperture_identity", "value": rel, "pass": rel < 1e-12})
    eq = mmse_sr_equivalence(hs, p, 100, np.random.Generator(np.random.Philox(key=mc.seed)))
    res.append({"name": "mmse_sr_equivalence", "value": eq["kendall_tau"], "pass": eq["pass"]})
    rng = np.random.Generator(np.random.Philox(key=[mc.seed, 7]))
    ds = draw_scalars(model, hs, p, sample_hbar(model, rng, 100))
    worst = 0.0
    for tau in np.linspace(0, 1, 41)[1:-1]:
        batch = dl.pareto_solve(float(tau), ds.n1, ds.n2, ds.rho, p.frame_len)
        inner = batch.case == dl.CASE_INTERIOR
        if np.any(inner):
            worst = max(worst, float(np.max(np.abs(batch.residual[inner]))))
    res.append({"name": "pareto_residual", "value": worst, "pass": worst < 1e-9})
    return res


def run_validation(cfg: Optional[ArrayConfig] = None, params: Optional[ScenarioParams] = None,
                   mc: Optional[McConfig] = None, tamper: float = 1.0,
                   model: Optional[CorrelatedChannelModel] = None) -> dict:
    """Run all pairings and invariants; ``tamper`` scales the closed-form eigenvalues."""
    mc = McConfig() if mc is None else mc
    sc = build_scenario(cfg, params, tamper, model)
    rows = [evaluate(pr, mc) for pr in registry(sc)]
    inv = invariants(sc, mc)
    ok = all(r["pass"] for r in rows) and all(r["pass"] for r in inv)
    return {"seed": mc.seed, "trials": mc.trials, "ci_z": mc.ci_z, "tamper": tamper,
            "n_modes": sc.model.n, "pairings": rows, "invariants": inv, "pass": ok}
