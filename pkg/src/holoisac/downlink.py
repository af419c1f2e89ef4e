"""Downlink sensing/communication metrics, beamformers and asymptotics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .array import ArrayConfig
from .channels import (CorrelatedChannelModel, ScenarioParams, SensingChannel,
                       omega)
from .exceptions import DomainError, SolverError
from .special import (EULER_GAMMA, LOG2E, SpectralStats, ergodic_kernel,
                      exp_outage)

# ---------------------------------------------------------------- helpers


def sensing_gain(hs: SensingChannel, params: ScenarioParams, p: Optional[float] = None,
                 sigma2: Optional[float] = None) -> float:
    """c = (p/sigma_s^2) L alpha_s ||h_s||^2, the scale in front of |h_s^T w|^2."""
    p = params.p if p is None else p
    sigma2 = params.sigma2_s if sigma2 is None else sigma2
    return p / sigma2 * params.frame_len * params.alpha_s * hs.norm_sq


def _stats(eigs, **kw) -> SpectralStats:
    return eigs if isinstance(eigs, SpectralStats) else SpectralStats(eigs, **kw)


def _outage_threshold(r0: float) -> float:
    return math.expm1(r0 * math.log(2.0))


def _unit(w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    nrm = np.linalg.norm(w)
    if nrm == 0:
        raise DomainError("zero beamformer")
    return w / nrm


def subspace_coords(model: CorrelatedChannelModel, hs: SensingChannel) -> np.ndarray:
    """g = U^H h_s, the sensing channel seen by the scattering modes."""
    return model.project(hs.h)


def compressed_rank_one_eigs(model: CorrelatedChannelModel, g: np.ndarray, alpha: float,
                             beta: float) -> np.ndarray:
    """Eigenvalues of R^(1/2) (alpha I + beta h h^H) R^(1/2) restricted to span(U).

    Every matrix of that form shares its nonzero spectrum with the n x n
    matrix Sigma^(1/2) (alpha I + beta g g^H) Sigma^(1/2), g = U^H h.
    """
    s = np.sqrt(model.eigs)
    sg = s * g
    m = alpha * np.diag(model.eigs).astype(complex) + beta * np.outer(sg, sg.conj())
    ev = np.linalg.eigvalsh(m)
    return ev[::-1]


# ---------------------------------------------------------------- sensing rate


def sr_instantaneous(w, hs: SensingChannel, params: ScenarioParams) -> float:
    """(1/L) log2(1 + c |h_s^T w|^2) for a unit-norm beam."""
    w = np.asarray(w, dtype=complex)
    g = abs(hs.h @ w) ** 2
    return math.log2(1.0 + sensing_gain(hs, params) * g) / params.frame_len


def mmse_of_beam(w, hs: SensingChannel, params: ScenarioParams) -> float:
    """MMSE of the target amplitude for a unit-norm beam."""
    w = np.asarray(w, dtype=complex)
    g = abs(hs.h @ w) ** 2
    return params.alpha_s / (1.0 + sensing_gain(hs, params) * g)


def _sc_snr(params: ScenarioParams, cfg: ArrayConfig, r_s: float) -> float:
    n = cfg.n_total
    return (params.p * params.frame_len * params.alpha_s * params.alpha0 ** 2 * n ** 2
            / (16 * math.pi ** 2 * params.sigma2_s * r_s ** 4))


def target_range(cfg: ArrayConfig, params: ScenarioParams) -> float:
    return float(np.linalg.norm(np.asarray(params.r_target) - cfg.center))


def sc_sr_closed(params: ScenarioParams, cfg: ArrayConfig) -> float:
    """Sensing rate of the matched-filter (sensing-centric) beam."""
    r_s = target_range(cfg, params)
    return math.log2(1.0 + _sc_snr(params, cfg, r_s)) / params.frame_len


def sc_sr_highsnr(params: ScenarioParams, cfg: ArrayConfig) -> float:
    r_s = target_range(cfg, params)
    return math.log2(_sc_snr(params, cfg, r_s)) / params.frame_len


def sc_sr_aor(params: ScenarioParams, cfg: ArrayConfig, eta: Optional[float] = None) -> float:
    """Same rate written through the aperture L_x L_y and occupation ratio eta.

    With ``eta=None`` the array's own ratio is used and the value equals
    ``sc_sr_closed``; ``eta=1`` gives the edge-to-edge upper limit.
    """
    eta = cfg.eta_aor if eta is None else eta
    r_s = target_range(cfg, params)
    mu_a = params.alpha0 / cfg.a_elem
    area = cfg.l_x * cfg.l_y * eta
    snr = (params.p * params.frame_len * params.alpha_s * mu_a ** 2 * area ** 2
           / (16 * math.pi ** 2 * params.sigma2_s * r_s ** 4))
    return math.log2(1.0 + snr) / params.frame_len


def sc_sr_bound(params: ScenarioParams, cfg: ArrayConfig) -> float:
    """Limit of the sensing rate as the occupation ratio tends to one."""
    return sc_sr_aor(params, cfg, eta=1.0)


# ---------------------------------------------------------------- S-C communication


def sc_ecr(params: ScenarioParams, model: CorrelatedChannelModel, hs: SensingChannel) -> float:
    """ECR of the sensing-centric beam: |h_s^H h_c|^2/||h_s||^2 is exponential, mean 1/Omega."""
    om = omega(model, hs)
    return ergodic_kernel(params.p / (params.sigma2_c * om))


def sc_ecr_highsnr(params, model, hs) -> float:
    om = omega(model, hs)
    return (math.log2(params.p) - math.log2(params.sigma2_c) - math.log2(om)
            - EULER_GAMMA * LOG2E)


def sc_op(params: ScenarioParams, model: CorrelatedChannelModel, hs: SensingChannel) -> float:
    om = omega(model, hs)
    return exp_outage(params.sigma2_c * om * _outage_threshold(params.r0) / params.p)


def sc_op_asymptote(params, model, hs) -> float:
    return params.sigma2_c * omega(model, hs) * _outage_threshold(params.r0) / params.p


# ---------------------------------------------------------------- C-C communication


def cc_op(params: ScenarioParams, eigs) -> float:
    """Outage of the communication-centric (MRT) beam: CDF of ||h_c||^2."""
    st = _stats(eigs)
    return st.cdf(params.sigma2_c * _outage_threshold(params.r0) / params.p)


def cc_log_op(params: ScenarioParams, eigs) -> float:
    """Natural log of ``cc_op``; stays finite where the probability underflows."""
    st = _stats(eigs)
    return st.log_cdf(params.sigma2_c * _outage_threshold(params.r0) / params.p)


def cc_log_op_asymptote(params: ScenarioParams, eigs) -> float:
    e = np.asarray(_stats(eigs).eigs)
    n = len(e)
    return (n * (math.log(_outage_threshold(params.r0)) + math.log(params.sigma2_c)
                 - math.log(params.p)) - math.lgamma(n + 1) - float(np.sum(np.log(e))))


def cc_op_asymptote(params: ScenarioParams, eigs) -> float:
    return math.exp(cc_log_op_asymptote(params, eigs))


def cc_ecr(params: ScenarioParams, eigs) -> float:
    return _stats(eigs).zeta(params.p / params.sigma2_c)


def cc_ecr_highsnr(params: ScenarioParams, eigs) -> float:
    return math.log2(params.p) - math.log2(params.sigma2_c) + _stats(eigs).upsilon()


def delta_eigs(params: ScenarioParams, model: CorrelatedChannelModel,
               hs: SensingChannel) -> np.ndarray:
    c = sensing_gain(hs, params)
    return compressed_rank_one_eigs(model, subspace_coords(model, hs), 1.0, c)


def cc_avg_sr(params: ScenarioParams, model: CorrelatedChannelModel,
              hs: SensingChannel) -> float:
    """Average sensing rate of the MRT beam, (upsilon_Delta - upsilon_R)/L."""
    if params.p == 0:
        return 0.0
    ud = SpectralStats(delta_eigs(params, model, hs)).upsilon()
    ur = SpectralStats(model.eigs).upsilon()
    return max(0.0, (ud - ur) / params.frame_len)


def xi_constant(params: ScenarioParams, cfg: ArrayConfig, model: CorrelatedChannelModel,
                hs: SensingChannel) -> float:
    r_s = hs.r_s
    n = cfg.n_total
    return (16 * math.pi ** 2 * params.sigma2_s * r_s ** 4 * omega(model, hs)
            / (params.frame_len * params.alpha_s * params.alpha0 ** 2 * n ** 2))


def cc_avg_sr_highsnr(params, cfg, model, hs) -> float:
    ur = SpectralStats(model.eigs).upsilon()
    return (math.log2(params.p) - math.log2(xi_constant(params, cfg, model, hs))
            - EULER_GAMMA * LOG2E - ur) / params.frame_len


# ---------------------------------------------------------------- Pareto design


@dataclass
class BeamformerResult:
    w: np.ndarray
    tau: float
    sr: float
    cr: float
    r_star: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ParetoBatch:
    """Vectorized Pareto solution for many channel draws at one tau.

    The beam is u = a h1 + b h2 e^{-j angle(rho)} (w = conj(u)); only the
    coefficients and rates are kept.
    """

    a: np.ndarray
    b: np.ndarray
    sr: np.ndarray
    cr: np.ndarray
    r_star: np.ndarray
    case: np.ndarray
    residual: np.ndarray


CASE_CC, CASE_INTERIOR, CASE_SC, CASE_DEGENERATE = 0, 1, 2, 3
CASE_NAMES = {0: "c-c", 1: "interior", 2: "s-c", 3: "degenerate"}


def _min_norm_sq(A1, A2, n1, n2, rho, det):
    """Smallest ||u||^2 meeting |h1^H u|^2 >= A1 and |h2^H u|^2 >= A2."""
    s1, s2 = np.sqrt(A1), np.sqrt(A2)
    a = (s1 * n2 - s2 * rho) / det
    b = (s2 * n1 - s1 * rho) / det
    both = (A1 * n2 + A2 * n1 - 2 * s1 * s2 * rho) / det
    single = np.maximum(A1 / n1, A2 / n2)
    return np.where((a >= 0) & (b >= 0), both, single)


def c13_residual(R, tau, n1, n2, rho, L):
    """Residual of the interior-point equation, scaled by ||h1||^2 ||h2||^2."""
    A1 = np.expm1((1 - tau) * R * math.log(2))
    A2 = np.expm1(tau * L * R * math.log(2))
    with np.errstate(invalid="ignore", divide="ignore"):
        xi1 = n1 - np.sqrt(A1 / A2) * rho
        xi2 = n2 - np.sqrt(A2 / A1) * rho
    g = xi1 * A2 + xi2 * A1 - (n1 * n2 - rho ** 2)
    return g / (n1 * n2)


def pareto_solve(tau: float, n1, n2, rho, L: int, max_iter: int = 400) -> ParetoBatch:
    """Pareto-optimal beam coefficients for arrays of (||h1||^2, ||h2||^2, |rho|).

    h1 = sqrt(p/sigma_c^2) h_c, h2 = sqrt(c) h_s and rho = |h1^H h2|; the
    sensing rate is log2(1+|h2^H u|^2)/L and the communication rate
    log2(1+|h1^H u|^2).
    """
    if not 0 <= tau <= 1:
        raise DomainError("tau must lie in [0, 1]")
    n1 = np.atleast_1d(np.asarray(n1, dtype=float))
    n2 = np.broadcast_to(np.asarray(n2, dtype=float), n1.shape).copy()
    rho = np.broadcast_to(np.asarray(rho, dtype=float), n1.shape).copy()
    det = n1 * n2 - rho ** 2
    degenerate = det <= 1e-12 * n1 * n2

    sr_cc = np.log2(1 + rho ** 2 / n1) / L
    cr_cc = np.log2(1 + n1)
    sr_sc = np.log2(1 + n2) / L
    cr_sc = np.log2(1 + rho ** 2 / n2)
    t_cc = sr_cc / (sr_cc + cr_cc)
    t_sc = sr_sc / (sr_sc + cr_sc)

    case = np.full(n1.shape, CASE_INTERIOR)
    case[tau <= t_cc] = CASE_CC
    case[(tau >= t_sc) & (case != CASE_CC)] = CASE_SC
    case[degenerate] = CASE_DEGENERATE

    a = np.zeros_like(n1)
    b = np.zeros_like(n1)
    r_star = np.zeros_like(n1)
    resid = np.full(n1.shape, np.nan)

    m = (case == CASE_CC) | (case == CASE_DEGENERATE)
    a[m] = 1 / np.sqrt(n1[m])
    with np.errstate(divide="ignore"):
        r_star[m] = np.where(tau < 1, cr_cc[m] / max(1 - tau, 1e-300), np.inf)
    r_star[m] = np.minimum(r_star[m], np.where(tau > 0, sr_cc[m] / max(tau, 1e-300), np.inf))
    m = case == CASE_SC
    b[m] = 1 / np.sqrt(n2[m])
    r_star[m] = np.minimum(np.where(tau > 0, sr_sc[m] / max(tau, 1e-300), np.inf),
                           np.where(tau < 1, cr_sc[m] / max(1 - tau, 1e-300), np.inf))

    m = case == CASE_INTERIOR
    if np.any(m):
        N1, N2, P, D = n1[m], n2[m], rho[m], det[m]
        lo = np.zeros_like(N1)
        # at either cap one constraint holds with equality for its own
        # endpoint beam and the residual is a perfect square: root bracketed
        hi = np.minimum(cr_cc[m] / (1 - tau), sr_sc[m] / tau)
        f_hi = _min_norm_sq(np.expm1((1 - tau) * hi * math.log(2)),
                            np.expm1(tau * L * hi * math.log(2)), N1, N2, P, D) - 1
        if np.any(f_hi < -1e-9):
            raise SolverError("Pareto root not bracketed",
                              {"tau": tau, "f_hi": float(f_hi.min())})
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if np.all((mid <= lo) | (mid >= hi)):
                break
            A1 = np.expm1((1 - tau) * mid * math.log(2))
            A2 = np.expm1(tau * L * mid * math.log(2))
            f = _min_norm_sq(A1, A2, N1, N2, P, D) - 1
            up = f < 0
            lo = np.where(up, mid, lo)
            hi = np.where(up, hi, mid)
        R = lo
        A1 = np.expm1((1 - tau) * R * math.log(2))
        A2 = np.expm1(tau * L * R * math.log(2))
        s1, s2 = np.sqrt(A1), np.sqrt(A2)
        aa = np.maximum((s1 * N2 - s2 * P) / D, 0)
        bb = np.maximum((s2 * N1 - s1 * P) / D, 0)
        a[m], b[m], r_star[m] = aa, bb, R
        resid[m] = c13_residual(R, tau, N1, N2, P, L)

    # normalize and evaluate rates by direct substitution
    nrm = np.sqrt(a * a * n1 + b * b * n2 + 2 * a * b * rho)
    a, b = a / nrm, b / nrm
    g1 = a * n1 + b * rho
    g2 = a * rho + b * n2
    cr = np.log2(1 + g1 ** 2)
    sr = np.log2(1 + g2 ** 2) / L
    return ParetoBatch(a=a, b=b, sr=sr, cr=cr, r_star=r_star, case=case, residual=resid)


def pareto_beamformer(tau: float, h_c: np.ndarray, hs: SensingChannel,
                      params: ScenarioParams) -> BeamformerResult:
    """Pareto-optimal beam for one channel draw (instantaneous CSI)."""
    h1 = math.sqrt(params.p / params.sigma2_c) * np.asarray(h_c, dtype=complex)
    h2 = math.sqrt(sensing_gain(hs, params)) * hs.h
    rho_c = np.vdot(h1, h2)
    n1 = float(np.real(np.vdot(h1, h1)))
    n2 = float(np.real(np.vdot(h2, h2)))
    res = pareto_solve(tau, n1, n2, abs(rho_c), params.frame_len)
    a, b = float(res.a[0]), float(res.b[0])
    phase = np.exp(1j * np.angle(rho_c))
    # u = a h1 + b h2 e^{-j angle rho}; the transmit beam is w = conj(u)
    w = _unit(a * h1.conj() + b * h2.conj() * phase)
    sr = sr_instantaneous(w, hs, params)
    cr = math.log2(1 + params.p / params.sigma2_c * abs(np.asarray(h_c) @ w) ** 2)
    case = int(res.case[0])
    return BeamformerResult(w=w, tau=tau, sr=sr, cr=cr, r_star=float(res.r_star[0]),
                            diagnostics={"case": CASE_NAMES[case],
                                         "residual": float(res.residual[0])})


# ---------------------------------------------------------------- statistical CSI


def scsi_cc_beamformer(model: CorrelatedChannelModel, tie_rel: float = 1e-9):
    """Principal plane wave of R returned as the transmit beam w = conj(a*).

    Returns ``(w, index, lambda1)``.  Near-ties within ``tie_rel`` go to the
    lexicographically smallest (m_x, m_y).
    """
    lam1 = model.eigs[0]
    cand = np.flatnonzero(model.eigs >= lam1 * (1 - tie_rel))
    if len(model.support):
        sup = model.support[cand]
        pick = cand[np.lexsort((sup[:, 1], sup[:, 0]))[0]]
    else:
        pick = cand[0]
    a = model.U[:, pick]
    return a.conj(), int(pick), float(model.eigs[pick])


def scsi_cc_ecr(params: ScenarioParams, lambda1: float) -> float:
    return ergodic_kernel(params.p * lambda1 / params.sigma2_c)


def scsi_cc_ecr_highsnr(params: ScenarioParams, lambda1: float) -> float:
    return (math.log2(params.p) - math.log2(params.sigma2_c) + math.log2(lambda1)
            - EULER_GAMMA * LOG2E)


def scsi_cc_op(params: ScenarioParams, lambda1: float) -> float:
    return exp_outage(params.sigma2_c * _outage_threshold(params.r0) / (params.p * lambda1))


def scsi_cc_op_asymptote(params: ScenarioParams, lambda1: float) -> float:
    return params.sigma2_c * _outage_threshold(params.r0) / (params.p * lambda1)


def gamma_scsi(params: ScenarioParams, cfg: ArrayConfig, model: CorrelatedChannelModel,
               hs: SensingChannel) -> float:
    """Sensing gain of the principal plane-wave beam.

    Built from the phase sum over elements; the prefactor is the one that
    makes it coincide with the sensing rate of the unit-norm beam.
    """
    _, idx, _ = scsi_cc_beamformer(model)
    a = model.U[:, idx]
    n = cfg.n_total
    # conj(a_b) e^{-j k0 r_cz} = sqrt(N) conj(a_n)
    s = np.sum(np.sqrt(n) * a.conj() * hs.b)
    return (params.frame_len * params.alpha_s * params.alpha0 ** 2
            / (16 * math.pi ** 2 * hs.r_s ** 4) * abs(s) ** 2)


def scsi_cc_sr(params: ScenarioParams, model: CorrelatedChannelModel, hs: SensingChannel,
               cfg: ArrayConfig) -> float:
    g = gamma_scsi(params, cfg, model, hs)
    return math.log2(1 + params.p / params.sigma2_s * g) / params.frame_len


def scsi_cc_sr_highsnr(params, model, hs, cfg) -> float:
    g = gamma_scsi(params, cfg, model, hs)
    return (math.log2(params.p) + math.log2(g / params.sigma2_s)) / params.frame_len


# ---------------------------------------------------------------- FDSAC


def fdsac_sr(params: ScenarioParams, hs: SensingChannel, p: float, sigma2: float,
             kappa: float, power_frac: float) -> float:
    """Sensing rate in a (1-kappa) sub-band with power fraction ``power_frac``."""
    if kappa >= 1:
        return 0.0
    snr = power_frac / (1 - kappa) * p / sigma2 * params.frame_len * params.alpha_s * hs.norm_sq ** 2
    return (1 - kappa) / params.frame_len * math.log2(1 + snr)


def fdsac_downlink(params: ScenarioParams, hs: SensingChannel, csi: str = "icsi",
                   model: Optional[CorrelatedChannelModel] = None,
                   h_c: Optional[np.ndarray] = None, kappa: Optional[float] = None,
                   iota: Optional[float] = None):
    """(SR, CR) of frequency-division sensing and communication.

    With ``h_c`` the instantaneous CR is returned; otherwise the ergodic CR
    over the model (``icsi``) or over the principal plane-wave beam (``scsi``).
    """
    kappa = params.kappa if kappa is None else kappa
    iota = params.iota if iota is None else iota
    sr = fdsac_sr(params, hs, params.p, params.sigma2_s, kappa, 1 - iota)
    if kappa <= 0:
        return sr, 0.0
    a = iota / kappa * params.p / params.sigma2_c
    if h_c is not None:
        if csi == "icsi":
            g = float(np.real(np.vdot(h_c, h_c)))
        else:
            w, _, _ = scsi_cc_beamformer(model)
            g = abs(np.asarray(h_c) @ w) ** 2
        return sr, kappa * math.log2(1 + a * g)
    if model is None:
        raise DomainError("ergodic FDSAC rate needs the channel model")
    if csi == "icsi":
        cr = kappa * SpectralStats(model.eigs).zeta(a)
    elif csi == "scsi":
        _, _, lam1 = scsi_cc_beamformer(model)
        cr = kappa * ergodic_kernel(a * lam1)
    else:
        raise DomainError(f"unknown CSI mode {csi!r}")
    return sr, cr


def fdsac_downlink_highsnr(params: ScenarioParams, hs: SensingChannel, csi: str = "icsi",
                           model: Optional[CorrelatedChannelModel] = None,
                           kappa: Optional[float] = None, iota: Optional[float] = None):
    """Large-p forms of ``fdsac_downlink``: slopes (1-kappa)/L and kappa."""
    kappa = params.kappa if kappa is None else kappa
    iota = params.iota if iota is None else iota
    sr = 0.0
    if kappa < 1:
        sr = (1 - kappa) / params.frame_len * math.log2(
            (1 - iota) / (1 - kappa) * params.p / params.sigma2_s
            * params.frame_len * params.alpha_s * hs.norm_sq ** 2)
    if kappa <= 0:
        return sr, 0.0
    a = iota / kappa * params.p / params.sigma2_c
    if csi == "icsi":
        cr = kappa * (math.log2(a) + SpectralStats(model.eigs).upsilon())
    elif csi == "scsi":
        _, _, lam1 = scsi_cc_beamformer(model)
        cr = kappa * (math.log2(a * lam1) - EULER_GAMMA * LOG2E)
    else:
        raise DomainError(f"unknown CSI mode {csi!r}")
    return sr, cr


# ---------------------------------------------------------------- asymptotics


@dataclass
class AsymptoticsReport:
    slope: Optional[float] = None
    offset: Optional[float] = None
    diversity: Optional[float] = None
    array_gain: Optional[float] = None
    omega: Optional[float] = None
    xi: Optional[float] = None
    analytic: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


def asymptotics(rate_fn: Optional[Callable[[float], float]] = None,
                log_op_fn: Optional[Callable[[float], float]] = None,
                p1_db: float = 60.0, p2_db: float = 70.0, analytic: Optional[dict] = None,
                omega_value: Optional[float] = None,
                xi_value: Optional[float] = None) -> AsymptoticsReport:
    """Two-point fits of high-SNR slope/offset and diversity/array gain.

    ``rate_fn(p)`` returns a rate at linear SNR p; ``log_op_fn(p)`` returns the
    natural log of an outage probability (``-inf`` on underflow).
    """
    rep = AsymptoticsReport(analytic=dict(analytic or {}), omega=omega_value, xi=xi_value)
    p1, p2 = 10 ** (p1_db / 10), 10 ** (p2_db / 10)
    dl = math.log2(p2) - math.log2(p1)
    if rate_fn is not None:
        r1, r2 = rate_fn(p1), rate_fn(p2)
        rep.slope = (r2 - r1) / dl
        if rep.slope > 0:
            rep.offset = math.log2(p2) - r2 / rep.slope
    if log_op_fn is not None:
        l1, l2 = log_op_fn(p1), log_op_fn(p2)
        if not (math.isfinite(l1) and math.isfinite(l2)) or l2 < math.log(1e-300):
            rep.notes.append("diversity unmeasurable at double precision")
        else:
            rep.diversity = -(l2 - l1) * LOG2E / dl
            if rep.diversity > 0:
                rep.array_gain = 2 ** (-(l2 * LOG2E) / rep.diversity - math.log2(p2))
    return rep
