"""SR-CR rate regions: Pareto sweeps, SDR design, time sharing and FDSAC."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channels import CorrelatedChannelModel, ScenarioParams, SensingChannel, sample_hbar
from .downlink import (fdsac_downlink, pareto_solve, scsi_cc_beamformer, scsi_cc_ecr,
                       sensing_gain, subspace_coords)
from .exceptions import DomainError, NumericError, SolverError
from .special import ergodic_kernel
from . import uplink as ul


@dataclass
class RegionPoint:
    sr: float
    cr: float
    knob: object
    design: str
    sr_se: float = 0.0
    cr_se: float = 0.0


@dataclass
class RateRegion:
    points: list
    meta: dict = field(default_factory=dict)

    @property
    def sr(self) -> np.ndarray:
        return np.array([p.sr for p in self.points])

    @property
    def cr(self) -> np.ndarray:
        return np.array([p.cr for p in self.points])

    def boundary(self) -> "RateRegion":
        return RateRegion(pareto_filter(self.points), dict(self.meta))

    def rows(self, label: str = ""):
        for p in self.points:
            knob = p.knob if not isinstance(p.knob, tuple) else ";".join(f"{k:.6g}" for k in p.knob)
            yield {"knob": knob, "sr": p.sr, "cr": p.cr, "design": p.design, "label": label}


def pareto_filter(points: Sequence[RegionPoint], tol: float = 0.0) -> list:
    """Keep non-dominated points, sorted by SR ascending (CR then descending)."""
    pts = sorted(points, key=lambda p: (-p.sr, -p.cr))
    out = []
    best_cr = -math.inf
    for p in pts:
        if p.cr > best_cr + tol:
            out.append(p)
            best_cr = p.cr
    return out[::-1]


def scenario_hash(*objs) -> str:
    def enc(o):
        if hasattr(o, "__dataclass_fields__"):
            return {k: enc(getattr(o, k)) for k in o.__dataclass_fields__ if not k.startswith("_")}
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (tuple, list)):
            return [enc(x) for x in o]
        return o
    blob = json.dumps([enc(o) for o in objs], sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- I-CSI downlink


@dataclass
class DrawScalars:
    """Per-draw quantities that fully determine the Pareto solution."""

    n1: np.ndarray
    n2: float
    rho: np.ndarray


def draw_scalars(model: CorrelatedChannelModel, hs: SensingChannel, params: ScenarioParams,
                 hbar: np.ndarray) -> DrawScalars:
    s = np.sqrt(model.eigs)
    g = subspace_coords(model, hs)
    snr = params.p / params.sigma2_c
    c = sensing_gain(hs, params)
    x = hbar * s
    n1 = snr * np.sum(np.abs(x) ** 2, axis=1)
    # h_c^H h_s = hbar^H Sigma^(1/2) g
    rho = math.sqrt(snr * c) * np.abs(x.conj() @ g)
    return DrawScalars(n1=n1, n2=c * hs.norm_sq, rho=rho)


def downlink_region_icsi(model: CorrelatedChannelModel, hs: SensingChannel,
                         params: ScenarioParams, grid: Sequence[float], trials: int = 1000,
                         rng: Optional[np.random.Generator] = None,
                         hbar: Optional[np.ndarray] = None) -> RateRegion:
    """Average Pareto (SR, CR) per tau over common channel draws."""
    if hbar is None:
        rng = np.random.default_rng(0) if rng is None else rng
        hbar = sample_hbar(model, rng, trials)
    ds = draw_scalars(model, hs, params, hbar)
    pts = []
    fails = 0
    resid_max = 0.0
    for tau in grid:
        try:
            res = pareto_solve(float(tau), ds.n1, ds.n2, ds.rho, params.frame_len)
        except SolverError:
            fails += 1
            if fails > 0.01 * len(grid):
                raise
            continue
        r = res.residual[np.isfinite(res.residual)]
        if r.size:
            resid_max = max(resid_max, float(np.max(np.abs(r))))
        k = len(res.sr)
        pts.append(RegionPoint(sr=float(res.sr.mean()), cr=float(res.cr.mean()), knob=float(tau),
                               design="pareto-icsi",
                               sr_se=float(res.sr.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0,
                               cr_se=float(res.cr.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0))
    return RateRegion(pts, {"trials": int(hbar.shape[0]), "grid": len(grid),
                            "failures": fails, "max_c13_residual": resid_max,
                            "scenario": scenario_hash(params)})


# ---------------------------------------------------------------- S-CSI downlink


@dataclass
class RelaxedSolution:
    """Solution of the relaxed max-min problem in an orthonormal (n+1)-dim basis.

    Beams are represented in the ``u = conj(w)`` domain, where the sensing
    and communication quality are u^H H u and u^H R u.
    """

    x_star: float
    mu: float
    basis: np.ndarray     # N x (n+1), orthonormal
    H: np.ndarray         # compressed h h^H
    R: np.ndarray         # compressed correlation
    W: np.ndarray         # compressed relaxed solution, PSD trace one
    tau: float


def _compressed_problem(model: CorrelatedChannelModel, hs: SensingChannel):
    g = subspace_coords(model, hs)
    resid = hs.h - model.U @ g
    rn = np.linalg.norm(resid)
    if rn > 1e-12 * np.linalg.norm(hs.h):
        basis = np.column_stack([model.U, resid / rn])
        gt = np.concatenate([g, [rn]])
        Rc = np.diag(np.concatenate([model.eigs, [0.0]])).astype(complex)
    else:
        basis = model.U
        gt = g
        Rc = np.diag(model.eigs).astype(complex)
    Hc = np.outer(gt, gt.conj())
    return basis, Hc, Rc


def _golden_min(f, lo=0.0, hi=1.0, tol=1e-10, max_iter=200):
    gr = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            x = 0.5 * (a + b)
            # endpoints can be optimal for a convex function on [0, 1]
            cands = [(f(lo), lo), (f(x), x), (f(hi), hi)]
            return min(cands)[1]
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    raise SolverError("golden-section search did not converge", {"interval": (a, b)})


def scsi_relaxed_solve(model: CorrelatedChannelModel, hs: SensingChannel, tau: float,
                       space_tol: float = 1e-6) -> RelaxedSolution:
    """Relaxed max over trace-one W of min(tr(HW)/tau, tr(RW)/(1-tau)).

    Solved through the dual min over mu of lambda_max(mu H/tau + (1-mu) R/(1-tau)).
    The primal W is rank one: a unit vector in the top eigenspace at the
    optimal mu that equalizes the two normalized objectives.
    """
    if not 0 < tau < 1:
        raise DomainError("tau must lie strictly inside (0, 1)")
    basis, Hc, Rc = _compressed_problem(model, hs)

    def lam_max(mu):
        return float(np.linalg.eigvalsh(mu * Hc / tau + (1 - mu) * Rc / (1 - tau))[-1])

    mu = _golden_min(lam_max)
    ev, vec = np.linalg.eigh(mu * Hc / tau + (1 - mu) * Rc / (1 - tau))
    x_star = float(ev[-1])
    top = vec[:, ev >= ev[-1] - space_tol * max(abs(ev[-1]), 1.0)]
    # objective difference restricted to the top eigenspace
    Dm = top.conj().T @ (Hc / tau - Rc / (1 - tau)) @ top
    de, dv = np.linalg.eigh(Dm)
    if de[-1] >= 0 >= de[0] and de[-1] > de[0]:
        # x^H D x = cos^2(t) de0 + sin^2(t) de1 vanishes at this angle
        t = math.atan(math.sqrt(-de[0] / de[-1])) if de[-1] > 0 else 0.5 * math.pi
        x = math.cos(t) * dv[:, 0] + math.sin(t) * dv[:, -1]
    else:
        # one objective dominates across the eigenspace; maximize the other
        M = top.conj().T @ (Rc / (1 - tau) if de[0] > 0 else Hc / tau) @ top
        x = np.linalg.eigh(M)[1][:, -1]
    x = top @ x
    x = x / np.linalg.norm(x)
    W = np.outer(x, x.conj())
    return RelaxedSolution(x_star=x_star, mu=mu, basis=basis, H=Hc, R=Rc, W=W, tau=tau)


def _ratio(u, Hc, Rc, tau):
    # u has shape (k, m): rows are candidate beams in compressed coordinates
    qh = np.real(np.sum((u.conj() @ Hc) * u, axis=1))
    qr = np.real(np.sum((u.conj() @ Rc) * u, axis=1))
    return np.minimum(qh / tau, qr / (1 - tau))


def sdr_randomize(W: np.ndarray, M: int, tau: float, Hc: np.ndarray, Rc: np.ndarray,
                  rng: np.random.Generator, psd_tol: float = 1e-9) -> np.ndarray:
    """Gaussian randomization: best of M draws u = P d with W = P P^H, d ~ CN(0, I).

    Works in the compressed u-domain; returns a unit vector there.
    """
    ev, vec = np.linalg.eigh(W)
    if ev[0] < -psd_tol * max(ev[-1], 1.0):
        raise NumericError("relaxed solution is not positive semidefinite")
    P = vec * np.sqrt(np.maximum(ev, 0.0))
    z = rng.standard_normal((M, W.shape[0], 2))
    d = (z[..., 0] + 1j * z[..., 1]) / math.sqrt(2)
    u = d @ P.T
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    best = int(np.argmax(_ratio(u, Hc, Rc, tau)))
    return u[best]


def scsi_point(model: CorrelatedChannelModel, hs: SensingChannel, params: ScenarioParams,
               u_full: np.ndarray):
    """(SR, ECR) of a beam given in the u = conj(w) domain."""
    w = u_full.conj()
    c = sensing_gain(hs, params)
    sr = math.log2(1 + c * abs(hs.h @ w) ** 2) / params.frame_len
    q = model.quad_form(u_full)
    ecr = ergodic_kernel(params.p / params.sigma2_c * q)
    return sr, ecr


def downlink_region_scsi(model: CorrelatedChannelModel, hs: SensingChannel,
                         params: ScenarioParams, grid: Sequence[float], M: int = 10000,
                         rng: Optional[np.random.Generator] = None, cfg=None) -> RateRegion:
    """Statistical-CSI region from the relaxed design plus randomization."""
    rng = np.random.default_rng(0) if rng is None else rng
    pts = []
    gaps = []
    for tau in grid:
        tau = float(tau)
        if tau <= 0:
            w, _, lam1 = scsi_cc_beamformer(model)
            sr = math.log2(1 + sensing_gain(hs, params) * abs(hs.h @ w) ** 2) / params.frame_len
            pts.append(RegionPoint(sr, scsi_cc_ecr(params, lam1), tau, "scsi-cc"))
            continue
        if tau >= 1:
            u = hs.h / np.linalg.norm(hs.h)
            sr, ecr = scsi_point(model, hs, params, u)
            pts.append(RegionPoint(sr, ecr, tau, "scsi-sc"))
            continue
        sol = scsi_relaxed_solve(model, hs, tau)
        uc = sdr_randomize(sol.W, M, tau, sol.H, sol.R, rng)
        achieved = float(_ratio(uc[None, :], sol.H, sol.R, tau)[0])
        gaps.append(achieved / sol.x_star)
        sr, ecr = scsi_point(model, hs, params, sol.basis @ uc)
        pts.append(RegionPoint(sr, ecr, tau, "sdr-scsi"))
    return RateRegion(pts, {"M": M, "grid": len(grid), "min_sdr_ratio": min(gaps) if gaps else 1.0,
                            "scenario": scenario_hash(params)})


# ---------------------------------------------------------------- uplink and FDSAC


def uplink_region(sc_pair, cc_pair, grid: Sequence[float], design: str = "time-sharing") -> RateRegion:
    pts = []
    for eps in grid:
        sr, cr = ul.time_sharing_pair(float(eps), sc_pair, cc_pair)
        pts.append(RegionPoint(sr, cr, float(eps), design))
    return RateRegion(pts, {"grid": len(grid)})


def fdsac_region(params: ScenarioParams, model: CorrelatedChannelModel, hs: SensingChannel,
                 kappa_grid: Sequence[float], iota_grid: Optional[Sequence[float]] = None,
                 link: str = "downlink", csi: str = "icsi") -> RateRegion:
    """All (kappa, iota) (downlink) or kappa (uplink) points of the split baseline."""
    pts = []
    if link == "downlink":
        iota_grid = kappa_grid if iota_grid is None else iota_grid
        for k in kappa_grid:
            for i in iota_grid:
                sr, cr = fdsac_downlink(params, hs, csi, model=model, kappa=float(k), iota=float(i))
                pts.append(RegionPoint(sr, cr, (float(k), float(i)), f"fdsac-dl-{csi}"))
    elif link == "uplink":
        for k in kappa_grid:
            sr, cr = ul.fdsac_uplink(model, hs, params, csi, kappa=float(k))
            pts.append(RegionPoint(sr, cr, float(k), f"fdsac-ul-{csi}"))
    else:
        raise DomainError(f"unknown link {link!r}")
    return RateRegion(pts, {"link": link, "csi": csi})


# ---------------------------------------------------------------- containment


@dataclass
class ContainmentReport:
    violations: list
    checked: int

    @property
    def ok(self) -> bool:
        return not self.violations


def boundary_cr_at(outer: RateRegion, sr: float, hull: bool = False) -> float:
    """Largest CR the outer region guarantees at a given SR.

    The outer region is read as the set dominated by its points; linear
    interpolation between consecutive boundary points adds time sharing
    when ``hull`` is true, otherwise only the staircase is used.
    """
    b = pareto_filter(outer.points)
    srs = np.array([p.sr for p in b])
    crs = np.array([p.cr for p in b])
    if sr > srs[-1]:
        return -math.inf
    if not hull:
        return float(crs[srs >= sr].max())
    return float(np.interp(sr, srs, crs, left=crs[0]))


def check_containment(inner: RateRegion, outer: RateRegion, tol: float = 1e-9,
                      se_mult: float = 3.0, hull: bool = True) -> ContainmentReport:
    """Sampled dominance test: each inner point must lie under the outer boundary.

    Tolerance per point is ``tol`` plus ``se_mult`` times the Monte Carlo
    standard errors attached to the points involved.
    """
    b = pareto_filter(outer.points)
    se_out = max([max(p.sr_se, p.cr_se) for p in b] + [0.0])
    viol = []
    for p in inner.points:
        slack = tol + se_mult * (max(p.sr_se, p.cr_se) + se_out)
        lim = boundary_cr_at(outer, p.sr - slack, hull=hull)
        if p.cr > lim + slack:
            viol.append((p.knob, p.sr, p.cr, lim))
    return ContainmentReport(viol, len(inner.points))
