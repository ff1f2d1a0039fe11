"""Monte Carlo oracle for the drawdown-capped put.

Paths of X are simulated on a uniform grid: each step adds an exact Gaussian
increment ``mu dt + sigma sqrt(dt) N(0, 1)`` and then, at the end of the step,
a Poisson(lam dt) number of Exp(rho) downward jumps.  The running maximum and
both stopping conditions are monitored at grid points only (the pre-jump and
post-jump positions of each step), so drawdown and barrier crossings are
detected slightly late.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import ContractState, ModelParams

DEFAULT_SEED = 20240607
# cap on (alive paths) x (steps per block) held in memory at once
_BLOCK_ELEMENTS = 2_000_000


class StopKind(enum.IntEnum):
    BARRIER = 0
    DRAWDOWN = 1
    TRUNCATED = 2


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 200_000
    dt: float = 1e-3
    t_max: float = 400.0
    seed: int = DEFAULT_SEED
    n_workers: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.n_workers < 1:
            raise ValueError("n_workers must be positive")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_max / self.dt - 1e-9))


@dataclass(frozen=True)
class PathOutcome:
    stop_time: float
    stop_kind: StopKind
    x_at_stop: float
    discounted_payoff: float


@dataclass
class PathBatch:
    """Raw per-path results of one simulation stream."""

    stop_time: np.ndarray
    stop_kind: np.ndarray
    x_at_stop: np.ndarray
    max_at_stop: np.ndarray
    jump_stop: np.ndarray  # True when the stopping position was reached by a jump


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_err: float
    truncation_bound: float
    n_paths: int
    kind_counts: dict = field(default_factory=dict)
    jump_stops: int = 0


def stream_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for stream ``index`` of a seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def simulate_batch(params: ModelParams, c: float, a: float, x0: float, xbar0: float,
                   n: int, dt: float, t_max: float, rng: np.random.Generator) -> PathBatch:
    """Simulate ``n`` paths until X <= a, drawdown >= c, or t_max."""
    n_steps = int(math.ceil(t_max / dt - 1e-9))
    drift = params.mu * dt
    vol = params.sigma * math.sqrt(dt)
    lam_dt = params.lam * dt
    jump_scale = 1.0 / params.rho

    stop_time = np.full(n, float(t_max))
    stop_kind = np.full(n, StopKind.TRUNCATED, dtype=np.int8)
    x_stop = np.full(n, float(x0))
    m_stop = np.full(n, max(float(xbar0), float(x0)))
    jump_stop = np.zeros(n, dtype=bool)

    at_barrier = x0 <= a
    at_drawdown = m_stop[0] - x0 >= c
    if at_barrier or at_drawdown:
        stop_time[:] = 0.0
        stop_kind[:] = StopKind.BARRIER if at_barrier else StopKind.DRAWDOWN
        return PathBatch(stop_time, stop_kind, x_stop, m_stop, jump_stop)

    alive = np.arange(n)
    X = x_stop.copy()
    M = m_stop.copy()
    step = 0
    while alive.size and step < n_steps:
        na = alive.size
        B = int(max(1, min(n_steps - step, _BLOCK_ELEMENTS // na, 4096)))
        incr = drift + vol * rng.standard_normal((na, B))
        post = np.cumsum(incr, axis=1)
        post += X[:, None]
        if lam_dt > 0:
            counts = rng.poisson(lam_dt, (na, B))
            hit = np.nonzero(counts)
            jumps = np.zeros((na, B))
            jumps[hit] = rng.gamma(counts[hit], jump_scale)
            post -= np.cumsum(jumps, axis=1)
            pre = post + jumps
        else:
            jumps = None
            pre = post
        runmax = np.maximum.accumulate(pre, axis=1)
        np.maximum(runmax, M[:, None], out=runmax)

        stop_pre = (pre <= a) | (runmax - pre >= c)
        stop_post = (post <= a) | (runmax - post >= c) if jumps is not None else stop_pre
        either = stop_pre | stop_post
        done = either.any(axis=1)

        if done.any():
            rows = np.nonzero(done)[0]
            k = np.argmax(either[rows], axis=1)
            use_pre = stop_pre[rows, k]
            xs = np.where(use_pre, pre[rows, k], post[rows, k])
            ids = alive[rows]
            stop_time[ids] = (step + k + 1) * dt
            x_stop[ids] = xs
            m_stop[ids] = runmax[rows, k]
            stop_kind[ids] = np.where(xs <= a, StopKind.BARRIER, StopKind.DRAWDOWN)
            if jumps is not None:
                jump_stop[ids] = ~use_pre

        keep = ~done
        X = post[keep, -1]
        M = runmax[keep, -1]
        alive = alive[keep]
        step += B

    if alive.size:
        x_stop[alive] = X
        m_stop[alive] = M
    return PathBatch(stop_time, stop_kind, x_stop, m_stop, jump_stop)


def discounted_payoffs(batch: PathBatch, r: float, K: float) -> np.ndarray:
    pay = np.exp(-r * batch.stop_time) * np.maximum(K - np.exp(batch.x_at_stop), 0.0)
    pay[batch.stop_kind == StopKind.TRUNCATED] = 0.0
    return pay


def simulate_path(params: ModelParams, contract: ContractState, a: float, cfg: McConfig,
                  stream_index: int = 0) -> PathOutcome:
    """Simulate a single path from stream ``stream_index`` of ``cfg.seed``."""
    rng = stream_rng(cfg.seed, stream_index)
    b = simulate_batch(params, contract.drawdown_c, a, contract.x, contract.xbar, 1, cfg.dt, cfg.t_max, rng)
    pay = discounted_payoffs(b, params.r, contract.strike_K)
    return PathOutcome(float(b.stop_time[0]), StopKind(int(b.stop_kind[0])), float(b.x_at_stop[0]), float(pay[0]))


def run_streams(params: ModelParams, c: float, a: float, x: float, xbar: float, cfg: McConfig) -> list[PathBatch]:
    """Split ``cfg.n_paths`` over ``cfg.n_workers`` deterministic streams and simulate them."""
    sizes = [len(s) for s in np.array_split(np.arange(cfg.n_paths), cfg.n_workers)]

    def work(i):
        return simulate_batch(params, c, a, x, xbar, sizes[i], cfg.dt, cfg.t_max, stream_rng(cfg.seed, i))

    if cfg.n_workers == 1:
        return [work(0)]
    with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
        return list(pool.map(work, range(cfg.n_workers)))


def estimate_price(params: ModelParams, contract: ContractState, a: float, cfg: McConfig) -> McEstimate:
    """Plain Monte Carlo estimate of E[e^{-r tau} (K - S_tau)^+] with tau = tau_a ^ tau_D."""
    K = contract.strike_K
    batches = run_streams(params, contract.drawdown_c, a, contract.x, contract.xbar, cfg)
    pay = np.concatenate([discounted_payoffs(b, params.r, K) for b in batches])
    kinds = np.concatenate([b.stop_kind for b in batches])
    jumps = int(sum(int(b.jump_stop.sum()) for b in batches))
    n = pay.size
    mean = float(pay.mean())
    std_err = float(pay.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    n_trunc = int((kinds == StopKind.TRUNCATED).sum())
    counts = {k.name: int((kinds == k).sum()) for k in StopKind}
    return McEstimate(mean, std_err, K * math.exp(-params.r * cfg.t_max) * n_trunc / n, n, counts, jumps)


def discounted_terminal_mean(params: ModelParams, x: float, T: float, n_paths: int, dt: float,
                             seed: int = DEFAULT_SEED) -> tuple[float, float]:
    """Mean and standard error of e^{-rT} e^{X_T} with stopping switched off."""
    rng = stream_rng(seed, 0)
    b = simulate_batch(params, math.inf, -math.inf, x, x, n_paths, dt, T, rng)
    vals = np.exp(-params.r * T + b.x_at_stop)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_paths))
