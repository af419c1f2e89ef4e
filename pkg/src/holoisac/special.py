"""Special functions and weighted-exponential-sum series.

A random variable X = sum_n lam_n |h_n|^2 with i.i.d. CN(0,1) entries has a
gamma-mixture representation: X given K=k is Gamma(r+k, lam_min), with
mixing weights w_k = C delta_k.  All distribution functions, the ergodic-rate
kernel ``zeta`` and the log-moment ``upsilon`` are built from that mixture.

When the eigenvalue spread makes the mixture too long (K beyond ``k_max``) the
``auto`` method switches to one-dimensional integral representations of the
same quantities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sps
from scipy import stats
from scipy.integrate import quad

from .exceptions import ConvergenceError, DomainError

EULER_GAMMA = 0.57721566490153286061
LOG2E = 1.0 / math.log(2.0)
K_MAX = 5000
MERGE_REL = 1e-9


# ---------------------------------------------------------------- scalar functions

def exp_integral_ei(x: float) -> float:
    """Ei(x) for x < 0, i.e. -E1(-x)."""
    x = float(x)
    if not x < 0:
        raise DomainError("Ei is only provided for negative arguments")
    z = -x
    if z < 8.0:
        # power series; alternating for negative x
        term = 1.0
        acc = 0.0
        k = 1
        while True:
            term *= x / k
            contrib = term / k
            acc += contrib
            if abs(contrib) < 1e-17 * max(abs(acc), 1e-300) or k > 500:
                break
            k += 1
        return EULER_GAMMA + math.log(z) + acc
    return -math.exp(-z) * _e1_cf_scaled(z)


def _e1_cf_scaled(z: float) -> float:
    """e^z E1(z) by the modified Lentz continued fraction (z >= 1)."""
    tiny = 1e-300
    b = z + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ConvergenceError("E1 continued fraction did not converge", {"z": z})


def exp_e1_scaled(z: float) -> float:
    """e^z E1(z) for z > 0, stable for both tiny and huge z."""
    z = float(z)
    if not z > 0:
        raise DomainError("scaled E1 needs a positive argument")
    if z < 8.0:
        return -math.exp(z) * exp_integral_ei(-z)
    return _e1_cf_scaled(z)


def lower_incomplete_gamma(s: float, x: float) -> float:
    """Unregularized lower incomplete gamma Upsilon(s, x)."""
    if s <= 0 or x < 0:
        raise DomainError("need s > 0 and x >= 0")
    if x == 0:
        return 0.0
    # in logs so that shapes past the gamma overflow give inf, not nan
    return float(np.exp(log_gammainc_lower(s, x) + sps.gammaln(s)))


def log_gammainc_lower(s, y):
    """log of the regularized lower incomplete gamma P(s, y), vectorized.

    Uses the series x^s e^-x / Gamma(s+1) * sum y^m / ((s+1)...(s+m)) in log
    form for y < s + 1, where P can underflow, and log1p(-Q) otherwise.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    s, y = np.broadcast_arrays(s, y)
    out = np.empty(s.shape)
    with np.errstate(divide="ignore"):
        small = y < s + 1
        zero = y <= 0
        # series branch
        ss, ys = s[small & ~zero], y[small & ~zero]
        if ss.size:
            term = np.ones_like(ss)
            acc = np.ones_like(ss)
            for m in range(1, 2000):
                term = term * ys / (ss + m)
                acc = acc + term
                if np.all(term < 1e-17 * acc):
                    break
            out[small & ~zero] = ss * np.log(ys) - ys - sps.gammaln(ss + 1) + np.log(acc)
        big = ~small & ~zero
        if np.any(big):
            out[big] = np.log1p(-sps.gammaincc(s[big], y[big]))
        out[zero] = -np.inf
    return out


def digamma(k: int) -> float:
    """psi(k) for a positive integer k via the harmonic sum."""
    k = int(k)
    if k < 1:
        raise DomainError("digamma is provided for positive integers only")
    return -EULER_GAMMA + math.fsum(1.0 / j for j in range(1, k))


def _scaled_expn_table(b: float, jmax: int) -> np.ndarray:
    """e^b E_j(b) for j = 1..jmax."""
    if b <= 1.0:
        out = np.empty(jmax)
        out[0] = exp_e1_scaled(b)
        for j in range(1, jmax):
            # E_{j+1} = (e^-b - b E_j)/j, stable when b/j < 1
            out[j] = (1.0 - b * out[j - 1]) / j
        return out
    n = np.arange(1, jmax + 1, dtype=float)
    tiny = 1e-300
    bb = b + n
    c = np.full_like(n, 1.0 / tiny)
    d = 1.0 / bb
    h = d.copy()
    for i in range(1, 5000):
        an = -i * (n - 1 + i)
        bb = bb + 2.0
        d = 1.0 / (an * d + bb)
        c = bb + an / c
        delta = c * d
        h *= delta
        if np.all(np.abs(delta - 1.0) < 1e-15):
            return h
    raise ConvergenceError("E_n continued fraction did not converge", {"b": b})


def ergodic_kernel(snr_mean: float) -> float:
    """E[log2(1 + g)] for g exponential with mean ``snr_mean`` (bps/Hz)."""
    if snr_mean <= 0:
        return 0.0
    return LOG2E * exp_e1_scaled(1.0 / snr_mean)


def exp_outage(threshold_over_mean: float) -> float:
    """P(g < t) for exponential g, given t / E[g]."""
    return -math.expm1(-threshold_over_mean)


# ---------------------------------------------------------------- mixture series

def moschopoulos_deltas(eigs, tol: float = 1e-10, k_max: int = K_MAX):
    """delta_0..delta_K of the gamma-mixture series and the truncation index K.

    The recursion is run until the remaining mixture weight 1 - sum w_k falls
    below ``tol``.  Returns ``(deltas, K)``; deltas may be astronomically large
    for wide spreads, in which case ``SpectralStats`` should be used (it keeps a
    log-scale offset).
    """
    st = SpectralStats(eigs, tol=tol, k_max=k_max, method="series")
    return np.exp(st.log_deltas), st.trunc_k


@dataclass
class SpectralStats:
    """Eigenvalue list plus the cached mixture weights of sum_n eigs_n |h_n|^2.

    ``method`` is ``"series"``, ``"integral"`` or ``"auto"`` (series when the
    predicted truncation fits under ``k_max``).
    """

    eigs: np.ndarray
    tol: float = 1e-10
    k_max: int = K_MAX
    method: str = "auto"
    log_deltas: np.ndarray = field(init=False, repr=False)
    log_w: np.ndarray = field(init=False, repr=False)
    trunc_k: int = field(init=False)
    series_ok: bool = field(init=False)

    def __post_init__(self):
        e = np.sort(np.asarray(self.eigs, dtype=float).ravel())[::-1]
        if e.size == 0:
            raise DomainError("empty eigenvalue list")
        if not np.all(np.isfinite(e)) or np.any(e <= 0):
            raise DomainError("eigenvalues must be finite and strictly positive")
        self.eigs = e
        self.lam_min = float(e[-1])
        ratio = self.lam_min / e
        q = 1.0 - ratio
        q[q < MERGE_REL] = 0.0
        self._q = q
        self.r = e.size
        self.log_c = float(np.sum(np.log(ratio)))
        # mixture index is a sum of geometric variables, each dominated by one
        # with the largest q, so a negative-binomial quantile bounds the cut
        m = int(np.count_nonzero(q))
        if m == 0:
            self.predicted_k = 0
        else:
            qmax = float(q.max())
            bound = stats.nbinom.isf(self.tol * 1e-2, m, 1.0 - qmax)
            self.predicted_k = int(min(bound, 10 * K_MAX)) + 10
        if self.method not in ("series", "integral", "auto"):
            raise DomainError(f"unknown method {self.method!r}")
        # the bound is conservative; the build stops as soon as the weights
        # reach unit mass, and ``auto`` falls back only if they never do
        self.series_ok = True
        if self.method == "integral":
            self.log_deltas = np.zeros(1)
            self.log_w = np.array([self.log_c])
            self.trunc_k = 0
            self._use_series = False
            return
        self._use_series = True
        self._build(min(self.predicted_k, self.k_max))

    def _build(self, kmax: int):
        q = self._q[self._q > 0]
        if q.size == 0:
            self.log_deltas = np.zeros(1)
            self.log_w = np.array([self.log_c])
            self.trunc_k = 0
            self._tail = np.array([0.0])
            return
        i = np.arange(1, kmax + 1)
        # g_i = sum_n q_n^i, in logs to avoid underflow then exponentiate
        g = np.exp(np.outer(i, np.log(q))).sum(axis=1)
        d = np.zeros(kmax + 1)
        d[0] = 1.0
        offset = 0.0
        log_c = self.log_c
        wsum = math.exp(log_c)
        done = None
        for k in range(1, kmax + 1):
            d[k] = np.dot(g[:k], d[k - 1::-1]) / k
            if d[k] > 1e250:
                d[:k + 1] *= 1e-250
                offset += 250 * math.log(10)
            wsum += math.exp(log_c + offset + math.log(d[k])) if d[k] > 0 else 0.0
            if 1.0 - wsum < self.tol * 1e-2 and done is None:
                done = k
                break
        kk = done if done is not None else kmax
        with np.errstate(divide="ignore"):
            self.log_deltas = np.log(d[:kk + 1]) + offset
        self.log_w = self.log_c + self.log_deltas
        self.trunc_k = kk
        w = np.exp(self.log_w)
        # remaining mass beyond index k, floored at rounding level
        self._tail = np.maximum(1.0 - np.cumsum(w), 0.0)
        if done is None and self.method == "series":
            raise ConvergenceError("mixture weights did not reach unit mass",
                                   {"k": kk, "missing_mass": float(1.0 - wsum),
                                    "predicted_k": self.predicted_k})
        if done is None:
            self._use_series = False
            self.series_ok = False

    @property
    def uses_series(self) -> bool:
        return self._use_series

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_w)

    # ---------------------------------------------------------- distribution

    def _shapes(self):
        return self.r + np.arange(len(self.log_w))

    def log_cdf(self, x: float) -> float:
        x = float(x)
        if x < 0:
            raise DomainError("CDF argument must be nonnegative")
        if x == 0:
            return -math.inf
        if not self._use_series:
            v = self._cdf_integral(x)
            return math.log(v) if v > 0 else -math.inf
        lp = log_gammainc_lower(self._shapes(), x / self.lam_min)
        terms = self.log_w + lp
        # P(r+k, y) falls with k, so tail <= remaining mass * last P
        return float(sps.logsumexp(terms))

    def cdf(self, x: float) -> float:
        if x <= 0:
            return 0.0
        return float(min(1.0, math.exp(self.log_cdf(x))))

    def pdf(self, x: float) -> float:
        x = float(x)
        if x < 0:
            raise DomainError("PDF argument must be nonnegative")
        if not self._use_series:
            return self._pdf_integral(x)
        if x == 0:
            return 1.0 / self.lam_min if self.r == 1 and len(self.log_w) == 1 else 0.0
        s = self._shapes()
        lt = (self.log_w + (s - 1) * math.log(x) - x / self.lam_min
              - s * math.log(self.lam_min) - sps.gammaln(s))
        return float(np.exp(sps.logsumexp(lt)))

    # ---------------------------------------------------------- expectations

    def zeta(self, a: float) -> float:
        """E[log2(1 + a X)] in bps/Hz."""
        if a < 0:
            raise DomainError("zeta needs a >= 0")
        if a == 0:
            return 0.0
        if not self._use_series:
            return self._zeta_integral(a)
        s = self._shapes()
        b = 1.0 / (a * self.lam_min)
        t = np.cumsum(_scaled_expn_table(b, int(s[-1])))[s - 1]
        w = np.exp(self.log_w)
        val = float(np.dot(w, t))
        # T_s is increasing in s; bound the neglected tail by its last value
        tail = float(self._tail[-1]) * 2.0 * math.log1p(a * self.lam_min * (s[-1] + 1))
        if tail > self.tol * max(val, 1e-300) and tail > 1e-14:
            # too much missing mass for this argument; integral is exact
            return self._zeta_integral(a)
        return LOG2E * val

    def upsilon(self) -> float:
        """E[log2 X]."""
        if not self._use_series:
            return self._upsilon_integral()
        s = self._shapes()
        w = np.exp(self.log_w)
        psi = sps.digamma(s.astype(float))
        return LOG2E * float(np.dot(w, psi + math.log(self.lam_min)) / w.sum())

    # ---------------------------------------------------------- integral forms

    def _log_mgf(self, t):
        # log E[exp(-t X)] = -sum log(1 + t lam)
        t = np.asarray(t, dtype=float)
        return -np.sum(np.log1p(np.multiply.outer(t, self.eigs)), axis=-1)

    def _zeta_integral(self, a: float) -> float:
        # ln(1+aX) = int_0^inf e^-s (1 - e^{-s a X}) / s ds, with s = e^u
        def f(u):
            s = math.exp(u)
            return math.exp(-s) * -math.expm1(float(self._log_mgf(s * a)))

        lo = -math.log(a * self.eigs.sum()) - 40.0
        val = _quad_sum(f, lo, 4.0)
        return LOG2E * val

    def _upsilon_integral(self) -> float:
        # ln X = int_0^inf (e^-s - e^{-sX}) / s ds
        def f(u):
            s = math.exp(u)
            return s * (math.exp(-s) - math.exp(float(self._log_mgf(s)))) / s

        hi = 4.0
        lo = min(-40.0, -math.log(self.eigs.sum()) - 40.0)
        hi = max(hi, -math.log(self.lam_min) + 40.0)
        return LOG2E * _quad_sum(f, lo, hi)

    def _cdf_integral(self, x: float) -> float:
        # Gil-Pelaez inversion of the characteristic function
        lam = self.eigs

        def f(t):
            if t == 0:
                return float(np.sum(lam)) - x
            ang = -t * x - np.sum(np.arctan(-t * lam))
            mag = np.exp(-0.5 * np.sum(np.log1p((t * lam) ** 2)))
            return mag * math.sin(ang) / t

        hi = 200.0 / self.lam_min
        val = _quad_sum(f, 0.0, hi, splits=np.geomspace(1e-3 / lam[0], hi, 60))
        return float(min(1.0, max(0.0, 0.5 - val / math.pi)))

    def _pdf_integral(self, x: float) -> float:
        lam = self.eigs

        def f(t):
            ang = -t * x - np.sum(np.arctan(-t * lam))
            mag = np.exp(-0.5 * np.sum(np.log1p((t * lam) ** 2)))
            return mag * math.cos(ang)

        hi = 200.0 / self.lam_min
        val = _quad_sum(f, 0.0, hi, splits=np.geomspace(1e-3 / lam[0], hi, 60))
        return max(0.0, val / math.pi)


def _quad_sum(f, lo, hi, splits=None) -> float:
    """Adaptive quadrature over [lo, hi] split into panels."""
    if splits is None:
        edges = np.linspace(lo, hi, 41)
    else:
        edges = np.unique(np.concatenate([[lo], np.asarray(splits), [hi]]))
        edges = edges[(edges >= lo) & (edges <= hi)]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, _ = quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        total += v
    return total


# ---------------------------------------------------------------- functional API

def weighted_expsum_cdf(stats: SpectralStats, x: float) -> float:
    return stats.cdf(x)


def weighted_expsum_pdf(stats: SpectralStats, x: float) -> float:
    return stats.pdf(x)


def zeta_ecr(eigs, a: float, **kw) -> float:
    """E[log2(1 + a sum eigs_n |h_n|^2)]."""
    st = eigs if isinstance(eigs, SpectralStats) else SpectralStats(eigs, **kw)
    return st.zeta(a)


def upsilon(eigs, **kw) -> float:
    """E[log2 sum eigs_n |h_n|^2]."""
    st = eigs if isinstance(eigs, SpectralStats) else SpectralStats(eigs, **kw)
    return st.upsilon()
