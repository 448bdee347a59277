"""Trajectory sampling for cooperative motion.

Friends are drawn from the exact law of ``X_k`` (computed by
``evolution``), which makes each sampled path an exact draw of the process.
The interacting particle system, where friends are other particles, is
provided separately as a mean-field approximation.

Randomness is split into fixed blocks of trajectories, each with its own
``SeedSequence`` child keyed by the block index, so results do not depend on
how many worker threads run the blocks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dist_core import LatticeDist, ModelParams
from .evolution import StepLaw, evolve_iter

BLOCK = 4096


def worker_count(default: int | None = None) -> int:
    """Worker cap from ``COOPMOTION_THREADS``, else ``default``, else the CPU count."""
    env = os.environ.get("COOPMOTION_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"COOPMOTION_THREADS must be an integer, got {env!r}") from None
    return max(1, default or os.cpu_count() or 1)


def dkw_bound(n_samples: int, alpha: float = 0.001) -> float:
    """Half-width of the DKW band: ``sqrt(ln(2/alpha) / (2n))``."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n_samples))


@dataclass(frozen=True)
class TrajectoryConfig:
    params: ModelParams
    init: LatticeDist
    horizon: int
    n_trajectories: int = 1
    seed: int = 0
    step: StepLaw | None = field(default=None)

    def __post_init__(self) -> None:
        if not self.params.integer_m:
            raise ValueError("simulation needs an integer m")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if self.step is None:
            object.__setattr__(self, "step", StepLaw.bernoulli(self.params.q))

    @property
    def m(self) -> int:
        return int(self.params.m)


class _Sampler:
    """Inverse-CDF sampler over the positive atoms of a LatticeDist, ±inf included."""

    def __init__(self, d: LatticeDist):
        values = [-math.inf] + [float(k) for k, _ in d.items()] + [math.inf]
        probs = [d.mass_neg_inf] + [p for _, p in d.items()] + [d.mass_pos_inf]
        keep = [i for i, p in enumerate(probs) if p > 0]
        self.values = np.array([values[i] for i in keep])
        self.cum = np.cumsum([probs[i] for i in keep])

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        u = rng.random(size) * self.cum[-1]
        idx = np.searchsorted(self.cum, u, side="right")
        return self.values[np.minimum(idx, self.values.size - 1)]


def exact_marginals(cfg: TrajectoryConfig) -> list[LatticeDist]:
    """Laws of ``X_0, ..., X_horizon``."""
    return [d for _, d in evolve_iter(cfg.init, cfg.step, cfg.params, range(cfg.horizon + 1))]


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _simulate(cfg, samplers, rng, size, keep_paths):
    x = samplers[0].draw(rng, size)
    paths = [x] if keep_paths else None
    for k in range(cfg.horizon):
        friends = samplers[k].draw(rng, (size, cfg.m))
        moves = cfg.step.sample(rng, size)
        match = np.all(friends == x[:, None], axis=1)
        # inf + d stays inf
        x = np.where(match, x + moves, x)
        if keep_paths:
            paths.append(x)
    return np.stack(paths, axis=1) if keep_paths else x


def sample_trajectory(cfg: TrajectoryConfig, marginals: list[LatticeDist], index: int = 0) -> list:
    """One path ``x_0, ..., x_horizon``; entries are ints, or ±inf for extended starts.

    ``marginals[k]`` must be the exact law of ``X_k``. Path ``index`` uses its
    own random stream.
    """
    if len(marginals) != cfg.horizon + 1:
        raise ValueError(f"need {cfg.horizon + 1} marginals, got {len(marginals)}")
    samplers = [_Sampler(d) for d in marginals]
    path = _simulate(cfg, samplers, _rng(cfg.seed, 1, index), 1, keep_paths=True)[0]
    return [int(v) if math.isfinite(v) else float(v) for v in path]


def _blocks(cfg: TrajectoryConfig, keep_paths: bool, workers: int | None):
    samplers = [_Sampler(d) for d in exact_marginals(cfg)]
    n = cfg.n_trajectories
    sizes = [min(BLOCK, n - start) for start in range(0, n, BLOCK)]

    def run(b):
        return _simulate(cfg, samplers, _rng(cfg.seed, 0, b), sizes[b], keep_paths)

    with ThreadPoolExecutor(max_workers=worker_count(workers)) as pool:
        return list(pool.map(run, range(len(sizes))))


def sample_paths(cfg: TrajectoryConfig, workers: int | None = None) -> np.ndarray:
    """All paths as a float array of shape ``(n_trajectories, horizon + 1)``."""
    return np.concatenate(_blocks(cfg, True, workers), axis=0)


def empirical(values: np.ndarray) -> LatticeDist:
    """Empirical law of integer-valued samples (±inf allowed)."""
    values = np.asarray(values, dtype=float)
    n = values.size
    neg = np.count_nonzero(values == -np.inf) / n
    pos = np.count_nonzero(values == np.inf) / n
    finite = values[np.isfinite(values)].astype(np.int64)
    if finite.size == 0:
        return LatticeDist(0, np.zeros(0), neg, pos)
    sites, counts = np.unique(finite, return_counts=True)
    return LatticeDist.from_pairs(zip(sites.tolist(), (counts / n).tolist()), neg, pos)


def sample_ensemble(cfg: TrajectoryConfig, workers: int | None = None) -> LatticeDist:
    """Empirical law of ``X_horizon`` over ``n_trajectories`` exact paths."""
    return empirical(np.concatenate(_blocks(cfg, False, workers)))


def sample_particle_system(cfg: TrajectoryConfig, n_particles: int) -> LatticeDist:
    """Empirical law after ``horizon`` synchronous updates of ``n_particles``
    interacting walkers whose friends are drawn uniformly, with replacement,
    from the current particle cloud.

    This only approximates the cooperative-motion law; the gap is an empirical
    quantity.
    """
    if n_particles < cfg.m + 1:
        raise ValueError(f"need at least m + 1 = {cfg.m + 1} particles")
    rng = _rng(cfg.seed, 2)
    x = _Sampler(cfg.init).draw(rng, n_particles)
    for _ in range(cfg.horizon):
        friends = x[rng.integers(0, n_particles, size=(n_particles, cfg.m))]
        moves = cfg.step.sample(rng, n_particles)
        match = np.all(friends == x[:, None], axis=1)
        x = np.where(match, x + moves, x)
    return empirical(x)


def sup_cdf_distance(d1: LatticeDist, d2: LatticeDist) -> float:
    """``sup_k |P(X1 < k) - P(X2 < k)|`` over the joint window."""
    lo = min(d1.offset, d2.offset)
    hi = max(d1.support_max, d2.support_max) + 2
    ks = np.arange(lo, hi + 1)
    return float(np.max(np.abs(d1.cdf(ks) - d2.cdf(ks))))
