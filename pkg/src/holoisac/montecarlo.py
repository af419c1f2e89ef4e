"""Monte Carlo oracle with reproducible, worker-count-independent streams.

Draws are split into fixed-size blocks.  Block ``b`` of stream ``s`` uses a
Philox counter generator keyed by (seed, s) with the block index in the top
counter word, so the draws depend only on (seed, stream, block) and never
on how blocks are spread over worker threads.  Results are merged in block
order before any reduction.
"""
from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .channels import ScenarioParams, SensingChannel
from .downlink import mmse_of_beam, sr_instantaneous
from .exceptions import DomainError, HoloIsacError

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class McConfig:
    trials: int = 100_000
    seed: int = 42
    workers: int = 1
    ci_z: float = 3.0
    block: int = 10_000

    def __post_init__(self):
        if self.trials < 100:
            raise DomainError("at least 100 trials are required")
        if self.workers < 1 or self.block < 1:
            raise DomainError("workers and block size must be positive")


class NonFiniteSample(HoloIsacError):
    def __init__(self, index: int):
        super().__init__(f"non-finite sample at draw {index}")
        self.index = index


def stream_id(name: str) -> int:
    """Stable 32-bit identifier of a named stream."""
    return zlib.crc32(name.encode())


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    bg = np.random.Philox(key=[seed & MASK64, stream & MASK64], counter=[0, 0, 0, block])
    return np.random.Generator(bg)


def run_blocks(draw_fn: Callable[[np.random.Generator, int], np.ndarray], mc: McConfig,
               stream: str, trials: Optional[int] = None) -> np.ndarray:
    """Evaluate ``draw_fn(rng, n)`` over all blocks and concatenate in block order."""
    trials = mc.trials if trials is None else trials
    sid = stream_id(stream)
    sizes = [mc.block] * (trials // mc.block)
    if trials % mc.block:
        sizes.append(trials % mc.block)

    def one(b):
        return np.asarray(draw_fn(block_rng(mc.seed, sid, b), sizes[b]), dtype=float)

    if mc.workers == 1 or len(sizes) == 1:
        parts = [one(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=mc.workers) as ex:
            parts = list(ex.map(one, range(len(sizes))))
    out = np.concatenate(parts)
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise NonFiniteSample(int(bad[0]))
    return out


def estimate_ecr(sampler: Callable, rate_fn: Callable, mc: McConfig, stream: str = "ecr",
                 trials: Optional[int] = None):
    """(mean, standard error) of ``rate_fn(sampler(rng, n))``."""
    x = run_blocks(lambda rng, n: rate_fn(sampler(rng, n)), mc, stream, trials)
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def estimate_op(sampler: Callable, rate_fn: Callable, r0: float, mc: McConfig,
                stream: str = "op", trials: Optional[int] = None, p_ref: Optional[float] = None):
    """(outage frequency, standard error) for the event rate < r0.

    With ``p_ref`` the binomial standard error is taken at that reference
    probability, which keeps the test meaningful for outages far below 1/trials.
    """
    x = run_blocks(lambda rng, n: (rate_fn(sampler(rng, n)) < r0).astype(float), mc, stream, trials)
    f = float(x.mean())
    p = f if p_ref is None else p_ref
    return f, math.sqrt(max(p * (1 - p), 0.0) / x.size)


def z_score(closed: float, mean: float, se: float, atol: float = 1e-12) -> float:
    """(mean - closed)/se; differences at rounding level count as exact agreement."""
    diff = mean - closed
    if abs(diff) <= atol * max(1.0, abs(closed)):
        return 0.0
    if se <= 0:
        return math.inf
    return diff / se


def mmse_sr_equivalence(hs: SensingChannel, params: ScenarioParams, probes: int = 100,
                        rng: Optional[np.random.Generator] = None) -> dict:
    """Check that SR and MSE order any set of beams in opposite directions.

    The probe set holds ``probes`` random unit beams, the matched filter and a
    beam orthogonal to it.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = len(hs.h)
    z = rng.standard_normal((probes, n, 2))
    ws = [(v[:, 0] + 1j * v[:, 1]) / np.linalg.norm(v) for v in z]
    matched = hs.h.conj() / np.linalg.norm(hs.h)
    ortho = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    ortho = ortho - matched * np.vdot(matched, ortho)
    ortho /= np.linalg.norm(ortho)
    ws = [matched, ortho] + ws
    sr = np.array([sr_instantaneous(w, hs, params) for w in ws])
    mse = np.array([mmse_of_beam(w, hs, params) for w in ws])
    # exhaustive pairwise check: SR order must mirror MSE order
    dsr = np.sign(sr[:, None] - sr[None, :])
    dmse = np.sign(mse[None, :] - mse[:, None])
    disagree = int(np.sum(dsr != dmse)) // 2
    tau = stats.kendalltau(sr, -mse).statistic
    return {
        "probes": len(ws),
        "kendall_tau": float(tau),
        "pair_disagreements": disagree,
        "matched_is_max_sr": bool(np.argmax(sr) == 0),
        "matched_is_min_mse": bool(np.argmin(mse) == 0),
        "matched_mse": float(mse[0]),
        "orthogonal_sr": float(sr[1]),
        "orthogonal_mse": float(mse[1]),
        "pass": bool(disagree == 0 and np.argmax(sr) == 0 and np.argmin(mse) == 0),
    }
