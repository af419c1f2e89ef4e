"""Uplink analysis with successive interference cancellation (SIC).

Two decoding orders are covered.  Communication-centric (c-c) SIC decodes the
user first with the target echo as interference.  Sensing-centric (s-c) SIC
estimates the target first.  Both are analyzed under instantaneous and
statistical CSI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channels import CorrelatedChannelModel, ScenarioParams, SensingChannel
from .downlink import (_outage_threshold, compressed_rank_one_eigs, sc_sr_closed,
                       scsi_cc_beamformer,
                       sc_sr_highsnr, subspace_coords)
from .exceptions import DomainError, NumericError
from .special import EULER_GAMMA, LOG2E, SpectralStats, ergodic_kernel, exp_outage


@dataclass
class UplinkDesignResult:
    order: str
    csi: str
    sr: Optional[float] = None
    ecr: Optional[float] = None
    op: Optional[float] = None
    v: Optional[np.ndarray] = None
    aux: dict = field(default_factory=dict)


def _c_up(hs: SensingChannel, params: ScenarioParams) -> float:
    # (p_s/sigma_u^2) L alpha_s ||h_s||^2
    return params.p_s / params.sigma2_u * params.frame_len * params.alpha_s * hs.norm_sq


def _c_prime(hs: SensingChannel, params: ScenarioParams) -> float:
    # same without the frame length: echo power seen by the detector
    return params.p_s / params.sigma2_u * params.alpha_s * hs.norm_sq


def apply_interference(params: ScenarioParams, varrho: Optional[float] = None) -> ScenarioParams:
    """Fold co-channel interference of power varrho*sigma_u^2 into the uplink noise."""
    varrho = params.varrho if varrho is None else varrho
    if varrho < 0:
        raise DomainError("varrho must be nonnegative")
    return params.with_(sigma2_u=params.sigma2_u * (1 + varrho), varrho=0.0)


# ---------------------------------------------------------------- c-c SIC, I-CSI


def cc_sic_sr_instantaneous(h_c: np.ndarray, hs: SensingChannel, params: ScenarioParams) -> float:
    h_c = np.asarray(h_c, dtype=complex)
    hh = hs.norm_sq
    ip = abs(np.vdot(hs.h, h_c)) ** 2
    nc = float(np.real(np.vdot(h_c, h_c)))
    eff = hh - params.p_c * ip / (params.p_c * nc + params.sigma2_u)
    snr = params.p_s * params.frame_len * params.alpha_s * hh / params.sigma2_u * eff
    return math.log2(1 + snr) / params.frame_len


def theta_eigs(model: CorrelatedChannelModel, hs: SensingChannel, params: ScenarioParams,
               psd_tol: float = 1e-8) -> np.ndarray:
    """Spectrum of Theta = R + c R^(1/2) (||h||^2 I - h h^H) R^(1/2)."""
    c = _c_up(hs, params)
    g = subspace_coords(model, hs)
    ev = compressed_rank_one_eigs(model, g, 1.0 + c * hs.norm_sq, -c)
    if ev[-1] < -psd_tol * ev[0]:
        raise NumericError("Theta is not positive semidefinite")
    return np.maximum(ev, ev[0] * 1e-300)


def psi_factor(hs: SensingChannel, params: ScenarioParams) -> float:
    return _c_up(hs, params) * hs.norm_sq + 1


def cc_sic_avg_sr(model: CorrelatedChannelModel, hs: SensingChannel,
                  params: ScenarioParams) -> float:
    """Average SR of c-c SIC under instantaneous CSI."""
    psi = psi_factor(hs, params)
    if params.p_c == 0:
        return math.log2(psi) / params.frame_len
    a = params.p_c / params.sigma2_u
    z_theta = SpectralStats(theta_eigs(model, hs, params)).zeta(a / psi)
    z_r = SpectralStats(model.eigs).zeta(a)
    return (z_theta - z_r + math.log2(psi)) / params.frame_len


def cc_sic_avg_sr_highsnr(model, hs, params) -> float:
    """Large-p_s form: Theta grows like p_s, so its log-moment replaces the zeta term.

    Written with p_c/(sigma_u^4 Psi~) where Psi~ = Psi/p_s; this coincides
    with the published expression when sigma_u^2 = 1.
    """
    c_t = params.frame_len * params.alpha_s * hs.norm_sq / params.sigma2_u
    psi_t = c_t * hs.norm_sq
    a = params.p_c / params.sigma2_u
    g = subspace_coords(model, hs)
    # Theta / p_s -> R^(1/2) c~ (||h||^2 I - h h^H) R^(1/2) as p_s grows
    th = compressed_rank_one_eigs(model, g, c_t * hs.norm_sq, -c_t)
    th = th[th > th[0] * 1e-12]
    z_theta = SpectralStats(th).zeta(a / psi_t)
    z_r = SpectralStats(model.eigs).zeta(a)
    return (z_theta - z_r + math.log2(params.p_s) + math.log2(psi_t)) / params.frame_len


def cc_sic_comm(model: CorrelatedChannelModel, params: ScenarioParams):
    """(ECR, OP) of c-c SIC: after echo removal the user sees no interference."""
    st = SpectralStats(model.eigs)
    ecr = st.zeta(params.p_c / params.sigma2_u)
    op = st.cdf(params.sigma2_u * _outage_threshold(params.r0) / params.p_c)
    return ecr, op


def cc_sic_log_op(model, params) -> float:
    st = SpectralStats(model.eigs)
    return st.log_cdf(params.sigma2_u * _outage_threshold(params.r0) / params.p_c)


# ---------------------------------------------------------------- s-c SIC, I-CSI


def phi_eigs(model: CorrelatedChannelModel, hs: SensingChannel, params: ScenarioParams,
             rel_floor: float = 1e-13) -> np.ndarray:
    """Positive spectrum of Phi = R^(1/2) (I + c' h h^H)^(-1) R^(1/2) via Woodbury."""
    cp = _c_prime(hs, params)
    g = subspace_coords(model, hs)
    k = cp / (1 + cp * hs.norm_sq)
    ev = compressed_rank_one_eigs(model, g, 1.0, -k)
    return ev[ev > rel_floor * ev[0]]


def sc_sic_ecr(model: CorrelatedChannelModel, hs: SensingChannel, params: ScenarioParams) -> float:
    return SpectralStats(phi_eigs(model, hs, params)).zeta(params.p_c / params.sigma2_u)


def sc_sic_ecr_highsnr(model, hs, params) -> float:
    return (math.log2(params.p_c) - math.log2(params.sigma2_u)
            + SpectralStats(phi_eigs(model, hs, params)).upsilon())


def sc_sic_op(model: CorrelatedChannelModel, hs: SensingChannel, params: ScenarioParams) -> float:
    st = SpectralStats(phi_eigs(model, hs, params))
    return st.cdf(params.sigma2_u * _outage_threshold(params.r0) / params.p_c)


def sc_sic_log_op(model, hs, params) -> float:
    st = SpectralStats(phi_eigs(model, hs, params))
    return st.log_cdf(params.sigma2_u * _outage_threshold(params.r0) / params.p_c)


def expsum_log_op_asymptote(eigs, thr: float, snr: float) -> float:
    """log of (thr/snr)^m / (m! prod eigs), the small-outage limit of the series CDF."""
    e = np.asarray(eigs, dtype=float)
    m = len(e)
    return m * (math.log(thr) - math.log(snr)) - math.lgamma(m + 1) - float(np.sum(np.log(e)))


def sc_sic_op_asymptote(model, hs, params) -> float:
    ev = phi_eigs(model, hs, params)
    return math.exp(expsum_log_op_asymptote(ev, _outage_threshold(params.r0),
                                            params.p_c / params.sigma2_u))


def sc_sic_sr(params: ScenarioParams, cfg) -> float:
    """Echo estimated after the user is removed: same as the matched-filter downlink SR."""
    return sc_sr_closed(params.with_(p=params.p_s, sigma2_s=params.sigma2_u), cfg)


def sc_sic_sr_highsnr(params, cfg) -> float:
    return sc_sr_highsnr(params.with_(p=params.p_s, sigma2_s=params.sigma2_u), cfg)


# ---------------------------------------------------------------- S-CSI


def _quad_inv(model: CorrelatedChannelModel, hs: SensingChannel, params: ScenarioParams) -> float:
    """h^H (p_c R + sigma^2 I)^(-1) h through the eigenbasis of R."""
    g = subspace_coords(model, hs)
    s2 = params.sigma2_u
    shrink = params.p_c * model.eigs / (params.p_c * model.eigs + s2)
    return (hs.norm_sq - float(np.sum(shrink * np.abs(g) ** 2))) / s2


def scsi_cc_sic_sr(model: CorrelatedChannelModel, hs: SensingChannel, params: ScenarioParams) -> float:
    q = _quad_inv(model, hs, params)
    return math.log2(1 + params.p_s * params.frame_len * params.alpha_s * hs.norm_sq * q) / params.frame_len


def scsi_cc_sic_sr_highsnr(model, hs, params) -> float:
    q = _quad_inv(model, hs, params)
    return (math.log2(params.p_s) + math.log2(params.frame_len * params.alpha_s * hs.norm_sq * q)) / params.frame_len


def scsi_detection_vector(model: CorrelatedChannelModel, hs: SensingChannel,
                          params: ScenarioParams):
    """Detection vector maximizing v^H R v / v^H M v, M = I + c' h h^H.

    Solved in the n-dimensional mode space: with K = I - k g g^H the top
    eigenpair (kappa, z) of Sigma^(1/2) K Sigma^(1/2) gives v ∝ M^(-1) U Sigma^(1/2) z.
    Returns ``(v, kappa)`` with ||v|| = 1.
    """
    cp = _c_prime(hs, params)
    g = subspace_coords(model, hs)
    k = cp / (1 + cp * hs.norm_sq)
    s = np.sqrt(model.eigs)
    sg = s * g
    m = np.diag(model.eigs).astype(complex) - k * np.outer(sg, sg.conj())
    ev, vec = np.linalg.eigh(m)
    kappa = float(ev[-1])
    if not kappa > 0:
        raise NumericError("principal generalized eigenvalue is not positive")
    y = model.U @ (s * vec[:, -1])
    # M^(-1) y by Sherman-Morrison
    v = y - k * hs.h * np.vdot(hs.h, y)
    v = v / np.linalg.norm(v)
    return v, kappa


def scsi_sc_comm(kappa_eig: float, params: ScenarioParams):
    """(ECR, OP) when |v^H h_c|^2 is exponential with mean ``kappa_eig``."""
    snr = params.p_c * kappa_eig / params.sigma2_u
    return ergodic_kernel(snr), exp_outage(_outage_threshold(params.r0) / snr)


def scsi_sc_comm_highsnr(kappa_eig: float, params: ScenarioParams):
    ecr = (math.log2(params.p_c) - math.log2(params.sigma2_u) + math.log2(kappa_eig)
           - EULER_GAMMA * LOG2E)
    op = params.sigma2_u * _outage_threshold(params.r0) / (params.p_c * kappa_eig)
    return ecr, op


def scsi_cc_sic_comm(model: CorrelatedChannelModel, params: ScenarioParams):
    """c-c SIC under S-CSI: interference-free detection along the principal mode."""
    _, _, lam1 = scsi_cc_beamformer(model)
    return scsi_sc_comm(lam1, params)


# ---------------------------------------------------------------- regions, baselines


def time_sharing_pair(epsilon: float, sc_pair, cc_pair):
    if not 0 <= epsilon <= 1:
        raise DomainError("epsilon must lie in [0, 1]")
    return (epsilon * sc_pair[0] + (1 - epsilon) * cc_pair[0],
            epsilon * sc_pair[1] + (1 - epsilon) * cc_pair[1])


def fdsac_uplink(model: CorrelatedChannelModel, hs: SensingChannel, params: ScenarioParams,
                 csi: str = "icsi", kappa: Optional[float] = None,
                 h_c: Optional[np.ndarray] = None):
    """(SR, CR) with the band split kappa / (1 - kappa) and full power per link."""
    kappa = params.kappa if kappa is None else kappa
    if kappa >= 1:
        sr = 0.0
    else:
        snr = (params.p_s / params.sigma2_u * params.frame_len * params.alpha_s
               * hs.norm_sq ** 2 / (1 - kappa))
        sr = (1 - kappa) / params.frame_len * math.log2(1 + snr)
    if kappa <= 0:
        return sr, 0.0
    a = params.p_c / (kappa * params.sigma2_u)
    if h_c is not None:
        h_c = np.asarray(h_c, dtype=complex)
        if csi == "icsi":
            g = float(np.real(np.vdot(h_c, h_c)))
        else:
            _, idx, _ = scsi_cc_beamformer(model)
            g = abs(np.vdot(model.U[:, idx], h_c)) ** 2
        return sr, kappa * math.log2(1 + a * g)
    if csi == "icsi":
        cr = kappa * SpectralStats(model.eigs).zeta(a)
    elif csi == "scsi":
        _, _, lam1 = scsi_cc_beamformer(model)
        cr = kappa * ergodic_kernel(a * lam1)
    else:
        raise DomainError(f"unknown CSI mode {csi!r}")
    return sr, cr


def fdsac_uplink_highsnr(model: CorrelatedChannelModel, hs: SensingChannel,
                         params: ScenarioParams, csi: str = "icsi",
                         kappa: Optional[float] = None):
    kappa = params.kappa if kappa is None else kappa
    sr = 0.0
    if kappa < 1:
        sr = (1 - kappa) / params.frame_len * math.log2(
            params.p_s / params.sigma2_u * params.frame_len * params.alpha_s
            * hs.norm_sq ** 2 / (1 - kappa))
    if kappa <= 0:
        return sr, 0.0
    a = params.p_c / (kappa * params.sigma2_u)
    if csi == "icsi":
        cr = kappa * (math.log2(a) + SpectralStats(model.eigs).upsilon())
    elif csi == "scsi":
        _, _, lam1 = scsi_cc_beamformer(model)
        cr = kappa * (math.log2(a * lam1) - EULER_GAMMA * LOG2E)
    else:
        raise DomainError(f"unknown CSI mode {csi!r}")
    return sr, cr


def uplink_corner_pairs(model: CorrelatedChannelModel, hs: SensingChannel,
                        params: ScenarioParams, cfg, csi: str = "icsi"):
    """(s-c pair, c-c pair) of (SR, ECR) for the two SIC orders."""
    sr_sc = sc_sic_sr(params, cfg)
    if csi == "icsi":
        sc_pair = (sr_sc, sc_sic_ecr(model, hs, params))
        cc_pair = (cc_sic_avg_sr(model, hs, params), cc_sic_comm(model, params)[0])
    elif csi == "scsi":
        _, kap = scsi_detection_vector(model, hs, params)
        sc_pair = (sr_sc, scsi_sc_comm(kap, params)[0])
        cc_pair = (scsi_cc_sic_sr(model, hs, params), scsi_cc_sic_comm(model, params)[0])
    else:
        raise DomainError(f"unknown CSI mode {csi!r}")
    return sc_pair, cc_pair
