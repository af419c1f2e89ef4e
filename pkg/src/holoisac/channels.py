"""Sensing and communication channel models.

The sensing link is a deterministic spherical wave.  The communication link is
correlated Rayleigh fading expanded over a discrete set of Fourier plane waves,
so its correlation matrix is held in factored form ``U diag(eigs) U^H``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .array import ArrayConfig, antenna_positions
from .exceptions import DegenerateGeometryError, DomainError, ModelError

PRUNE_REL = 1e-12


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class ScenarioParams:
    """Powers, noise levels, gains and geometry of one scenario.

    Powers are linear and normalized so that ``p/sigma2`` is the SNR.
    ``mu_i_gain`` is the product A*mu_i that scales the scattering variances.
    """

    p: float = 1e3
    p_c: float = 1e3
    p_s: float = 1e3
    sigma2_s: float = 1.0
    sigma2_c: float = 1.0
    sigma2_u: float = 1.0
    alpha_s: float = 1.0
    alpha0: float = 1.0
    mu_i_gain: float = 1.0
    frame_len: int = 4
    r_target: tuple = (0.0, 0.0, 3.0)
    r_user: tuple = (1.0, 1.0, 5.0)
    r0: float = 12.0
    kappa: float = 0.5
    iota: float = 0.5
    varrho: float = 0.0

    def __post_init__(self):
        # zero power is allowed (limit checks), negative is not
        for name in ("p", "p_c", "p_s", "alpha_s"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be nonnegative")
        for name in ("sigma2_s", "sigma2_c", "sigma2_u", "alpha0", "mu_i_gain"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")
        if int(self.frame_len) != self.frame_len or self.frame_len < 1:
            raise ModelError("frame_len must be a positive integer")
        if not (0 <= self.kappa <= 1 and 0 <= self.iota <= 1):
            raise ModelError("kappa and iota must lie in [0, 1]")
        if self.varrho < 0:
            raise ModelError("varrho must be nonnegative")
        if self.r0 < 0:
            raise ModelError("r0 must be nonnegative")
        for name in ("r_target", "r_user"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 3 or v[2] <= 0:
                raise ModelError(f"{name} must be a 3-vector with positive z")
            object.__setattr__(self, name, v)

    def with_(self, **kw) -> "ScenarioParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class SensingChannel:
    h: np.ndarray
    b: np.ndarray
    r_s: float
    norm_sq: float


@dataclass(frozen=True)
class TargetDraw:
    """Target response G = beta h_s h_s^T, kept as the pair (beta, h_s)."""

    beta: complex
    h_s: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        # G x without forming the N x N matrix
        return self.beta * self.h_s * (self.h_s @ x)


@dataclass(frozen=True)
class CorrelatedChannelModel:
    """Factored correlation R = U diag(eigs) U^H with eigs sorted descending."""

    support: np.ndarray
    variances: np.ndarray
    U: np.ndarray
    eigs: np.ndarray
    n_total: int
    identity: bool = False
    _sqrt_eigs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_sqrt_eigs", np.sqrt(self.eigs))

    @property
    def n(self) -> int:
        return len(self.eigs)

    @property
    def trace(self) -> float:
        return float(np.sum(self.eigs))

    def dense(self) -> np.ndarray:
        """Materialize R; for tests and small arrays only."""
        return (self.U * self.eigs) @ self.U.conj().T

    def quad_form(self, x: np.ndarray) -> float:
        """x^H R x evaluated through the factorization."""
        y = self.U.conj().T @ x
        return float(np.real(np.sum(self.eigs * np.abs(y) ** 2)))

    def project(self, x: np.ndarray) -> np.ndarray:
        """Coordinates U^H x of a vector in the scattering subspace."""
        return self.U.conj().T @ x


def sensing_channel(cfg: ArrayConfig, params: ScenarioParams) -> SensingChannel:
    """Spherical-wave sensing channel with a common path gain across elements."""
    target = np.asarray(params.r_target, dtype=float)
    pos = antenna_positions(cfg)
    dist = np.linalg.norm(target[None, :] - pos, axis=1)
    if np.min(dist) <= 1e-12:
        raise DomainError("target coincides with an antenna element")
    r_s = float(np.linalg.norm(target - cfg.center))
    b = np.exp(-1j * cfg.k0 * dist)
    amp = np.sqrt(params.alpha0 / (4 * np.pi * r_s ** 2))
    h = amp * b
    norm_sq = cfg.n_total * params.alpha0 / (4 * np.pi * r_s ** 2)
    return SensingChannel(h=h, b=b, r_s=r_s, norm_sq=norm_sq)


def wavenumber_support(cfg: ArrayConfig) -> np.ndarray:
    """Integer pairs (m_x, m_y) inside the ellipse (m_x lam/L_x)^2 + (m_y lam/L_y)^2 <= 1."""
    mx_max = int(np.floor(cfg.l_x / cfg.wavelength + 1e-9))
    my_max = int(np.floor(cfg.l_y / cfg.wavelength + 1e-9))
    pts = []
    for mx in range(-mx_max, mx_max + 1):
        for my in range(-my_max, my_max + 1):
            # compare in integer-friendly form to avoid boundary flicker
            v = (mx * cfg.wavelength / cfg.l_x) ** 2 + (my * cfg.wavelength / cfg.l_y) ** 2
            if v <= 1 + 1e-12:
                pts.append((mx, my))
    return np.array(pts, dtype=int).reshape(-1, 2)


def _isotropic_cell_mass(mx: int, my: int, cfg: ArrayConfig) -> float:
    """Integral of 1/sqrt(k0^2 - kx^2 - ky^2) over one wavenumber cell inside the disk."""
    k0 = cfg.k0
    dkx = 2 * np.pi / cfg.l_x
    dky = 2 * np.pi / cfg.l_y
    x0, x1 = max(mx * dkx - dkx / 2, -k0), min(mx * dkx + dkx / 2, k0)
    y0, y1 = my * dky - dky / 2, my * dky + dky / 2
    if x0 >= x1:
        return 0.0

    def inner(kx):
        c = np.sqrt(max(k0 * k0 - kx * kx, 0.0))
        if c == 0.0:
            return 0.0
        a, b = max(y0, -c), min(y1, c)
        if a >= b:
            return 0.0
        # the ky integral is elementary
        return np.arcsin(b / c) - np.arcsin(a / c)

    val, _ = quad(inner, x0, x1, epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def variance_profile(cfg: ArrayConfig, params: ScenarioParams, support,
                     profile: str | Callable = "isotropic") -> np.ndarray:
    """Scattering variances sigma^2(m) = A mu_i * sigma_i^2(m), normalized over the support.

    ``profile`` is ``"isotropic"``, ``"uniform"`` or a callable ``f(mx, my, cfg)``
    returning the unnormalized mass of one cell.
    """
    support = np.asarray(support, dtype=int).reshape(-1, 2)
    if len(support) == 0:
        raise ModelError("empty wavenumber support")
    if profile == "isotropic":
        fn = _isotropic_cell_mass
    elif profile == "uniform":
        fn = lambda mx, my, c: 1.0  # noqa: E731
    elif callable(profile):
        fn = profile
    else:
        raise ModelError(f"unknown variance profile {profile!r}")
    mass = np.array([fn(int(mx), int(my), cfg) for mx, my in support], dtype=float)
    if not np.all(np.isfinite(mass)) or np.any(mass < 0):
        raise ModelError("variance profile produced invalid cell masses")
    total = mass.sum()
    if total <= 0:
        raise ModelError("variance profile is identically zero")
    return params.mu_i_gain * mass / total


def fourier_basis(cfg: ArrayConfig, params: ScenarioParams, support) -> np.ndarray:
    """Semi-unitary N x n matrix whose columns are discrete plane waves."""
    support = np.asarray(support, dtype=int).reshape(-1, 2)
    classes = {(int(mx) % cfg.n_x, int(my) % cfg.n_y) for mx, my in support}
    if len(classes) != len(support):
        raise ModelError("support entries alias onto the same array frequency")
    pos = antenna_positions(cfg)
    phase = (np.outer(pos[:, 0], support[:, 0]) / cfg.l_x
             + np.outer(pos[:, 1], support[:, 1]) / cfg.l_y)
    r_cz = params.r_user[2]
    return np.exp(-2j * np.pi * phase) * np.exp(1j * cfg.k0 * r_cz) / np.sqrt(cfg.n_total)


def correlation_model(cfg: ArrayConfig, params: ScenarioParams,
                      profile: str | Callable = "isotropic",
                      identity: Optional[bool] = None) -> CorrelatedChannelModel:
    """Assemble the factored correlation model.

    With ``identity=True`` (default for conventional arrays) R is the identity
    scaled to A*mu_i per antenna, i.e. i.i.d. Rayleigh fading.
    """
    if identity is None:
        identity = cfg.conventional
    N = cfg.n_total
    if identity:
        eye = np.eye(N, dtype=complex)
        eigs = np.full(N, params.mu_i_gain)
        return CorrelatedChannelModel(support=np.zeros((0, 2), dtype=int),
                                      variances=eigs / N, U=eye, eigs=eigs,
                                      n_total=N, identity=True)
    support = wavenumber_support(cfg)
    var = variance_profile(cfg, params, support, profile)
    keep = var > PRUNE_REL * var.max()
    support, var = support[keep], var[keep]
    U = fourier_basis(cfg, params, support)
    eigs = N * var
    # descending eigenvalue, ties broken by lexicographic (m_x, m_y)
    order = np.lexsort((support[:, 1], support[:, 0], -eigs))
    return CorrelatedChannelModel(support=support[order], variances=var[order],
                                  U=U[:, order], eigs=eigs[order], n_total=N)


def sample_hbar(model: CorrelatedChannelModel, rng: np.random.Generator,
                size: Optional[int] = None) -> np.ndarray:
    """Standard circular complex Gaussian coordinates, shape (n,) or (size, n)."""
    shape = (model.n,) if size is None else (size, model.n)
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2)


def sample_comm_channel(model: CorrelatedChannelModel, rng: np.random.Generator,
                        size: Optional[int] = None) -> np.ndarray:
    """Draw h_c = U Sigma^(1/2) hbar; returns shape (N,) or (size, N)."""
    hbar = sample_hbar(model, rng, size)
    return (hbar * model._sqrt_eigs) @ model.U.T


def sample_target_amplitude(params: ScenarioParams, rng: np.random.Generator,
                            size: Optional[int] = None):
    """Complex target amplitude beta ~ CN(0, alpha_s)."""
    shape = () if size is None else (size,)
    z = rng.standard_normal(shape + (2,))
    beta = np.sqrt(params.alpha_s / 2) * (z[..., 0] + 1j * z[..., 1])
    return complex(beta) if size is None else beta


def omega(model: CorrelatedChannelModel, hs: SensingChannel, tol: float = 1e-12) -> float:
    """Omega = N / (b^H R b); large when the target direction is poorly scattered."""
    q = model.quad_form(hs.b)
    if q <= tol * model.trace * len(hs.b):
        raise DegenerateGeometryError("b^H R b vanishes: sensing direction carries no "
                                      "scattering energy")
    return len(hs.b) / q
