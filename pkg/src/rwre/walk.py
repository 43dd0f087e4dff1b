"""Quenched/annealed walks, regeneration times and i.i.d. regeneration blocks."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from . import kernels as K
from .env import Environment, EnvironmentLaw, vec

log = logging.getLogger(__name__)

DEFAULT_STEP_CAP = 1_000_000
BLOCKS_PER_REPLICATE = 1000


class HorizonExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Path:
    start: tuple
    steps: np.ndarray  # (n, d) increments

    @property
    def positions(self) -> np.ndarray:
        x0 = np.asarray(self.start, dtype=np.int64)
        return np.vstack([x0, x0 + np.cumsum(self.steps, axis=0)])

    def __len__(self):
        return self.steps.shape[0]


@dataclass(frozen=True)
class RegenerationBlock:
    duration: int
    increments: np.ndarray
    displacement: tuple


def _packed_args(law: EnvironmentLaw):
    pk = law.packed
    return pk.family, pk.atom_cdf, pk.jump_z, pk.jump_cdf, pk.n_jumps


def run_quenched(env: Environment, x0, n_steps: int, walk_seed) -> Path:
    x0 = np.asarray(vec(x0), dtype=np.int64)
    if x0.shape != (env.law.dim,):
        raise ValueError(f"start point {tuple(x0)} does not match dimension {env.law.dim}")
    pos = K.quenched_path(*_packed_args(env.law), env.key, _rng.key(walk_seed), x0, int(n_steps))
    return Path(tuple(int(c) for c in x0), np.diff(pos, axis=0))


def regeneration_times(path: Path, u_hat, threshold: float = 1.0) -> np.ndarray:
    proj = path.positions @ np.asarray(vec(u_hat), dtype=np.float64)
    return K.regeneration_indices(proj, float(threshold))


def replicate_keys(master_seed, replicate: int):
    return (
        _rng.derive_key(master_seed, replicate, 0),
        _rng.derive_key(master_seed, replicate, 1),
    )


@dataclass
class BlockSet:
    """Blocks harvested from annealed replicates, in replicate order."""

    law: EnvironmentLaw
    threshold: float
    master_seed: int
    replicate: np.ndarray
    block_index: np.ndarray
    duration: np.ndarray
    displacement: np.ndarray  # (n, d)
    aborted: list = field(default_factory=list)  # (replicate, blocks_done) capped

    def __len__(self):
        return self.duration.shape[0]

    def blocks(self, limit: int | None = None) -> list:
        """Materialise :class:`RegenerationBlock` objects with increments.

        Increments are recovered by replaying each replicate's walk, which is
        deterministic in its keys.
        """
        out = []
        n = len(self) if limit is None else min(limit, len(self))
        for r in np.unique(self.replicate[:n]):
            sel = np.flatnonzero(self.replicate[:n] == r)
            env_key, walk_key = replicate_keys(self.master_seed, int(r))
            total = int(self.duration[sel].sum())
            path = run_quenched(Environment(self.law, env_key), (0,) * self.law.dim, total, walk_key)
            offs = np.concatenate([[0], np.cumsum(self.duration[sel])])
            for j, i in enumerate(sel):
                inc = path.steps[offs[j]:offs[j + 1]]
                out.append(RegenerationBlock(int(self.duration[i]), inc, tuple(int(c) for c in self.displacement[i])))
        return out

    def to_csv(self, path) -> None:
        d = self.displacement.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["replicate", "block_index", "duration"] + [f"dx{c}" for c in range(d)])
            for r, b, t, x in zip(self.replicate, self.block_index, self.duration, self.displacement):
                w.writerow([int(r), int(b), int(t)] + [int(c) for c in x])


def _harvest_one(law, threshold, master_seed, r, n_blocks, step_cap):
    env_key, walk_key = replicate_keys(master_seed, r)
    dur = np.zeros(n_blocks, dtype=np.int64)
    disp = np.zeros((n_blocks, law.dim), dtype=np.int64)
    done, status, _ = K.harvest_blocks(
        *_packed_args(law), law.packed.u_hat, _rng.key(env_key), _rng.key(walk_key),
        n_blocks, float(threshold), int(step_cap), dur, disp,
    )
    return r, dur[:done], disp[:done], status


def sample_blocks(law: EnvironmentLaw, threshold: float = 1.0, count: int = 1000, master_seed=0,
                  step_cap: int = DEFAULT_STEP_CAP, per_replicate: int = BLOCKS_PER_REPLICATE,
                  workers: int = 1) -> BlockSet:
    """Harvest ``count`` regeneration blocks from annealed walks.

    Replicate ``r`` gets a fresh environment and walk derived from
    ``(master_seed, r)`` and contributes ``per_replicate`` consecutive blocks
    (fewer for the last one).  A replicate whose block runs past
    ``step_cap`` is cut short and listed in ``BlockSet.aborted``.
    """
    n_rep = max(1, math.ceil(count / per_replicate))
    sizes = [per_replicate] * (n_rep - 1) + [count - per_replicate * (n_rep - 1)]
    jobs = [(law, threshold, master_seed, r, sizes[r], step_cap) for r in range(n_rep)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(lambda a: _harvest_one(*a), jobs))
    else:
        results = [_harvest_one(*a) for a in jobs]
    results.sort(key=lambda t: t[0])
    rep, idx, dur, disp, aborted = [], [], [], [], []
    for r, d_, x_, status in results:
        rep.append(np.full(d_.shape[0], r, dtype=np.int64))
        idx.append(np.arange(d_.shape[0], dtype=np.int64))
        dur.append(d_)
        disp.append(x_)
        if status != K.STATUS_OK:
            aborted.append((r, int(d_.shape[0])))
            log.warning("replicate %d hit the step cap after %d blocks", r, d_.shape[0])
    return BlockSet(law, threshold, master_seed, np.concatenate(rep), np.concatenate(idx),
                    np.concatenate(dur), np.concatenate(disp), aborted)


def first_regeneration_times(law: EnvironmentLaw, replicates: int, master_seed=0, cap: int = DEFAULT_STEP_CAP,
                             threshold: float = 1.0) -> np.ndarray:
    """``min(sigma_1, cap)`` for independent annealed replicates."""
    keys = [replicate_keys(master_seed, r) for r in range(replicates)]
    env_keys = np.array([k[0] for k in keys], dtype=np.uint64)
    walk_keys = np.array([k[1] for k in keys], dtype=np.uint64)
    return K.first_regeneration(*_packed_args(law), law.packed.u_hat, env_keys, walk_keys, int(cap), float(threshold))


@dataclass(frozen=True)
class CommonPoints:
    increments: np.ndarray  # L_j - L_{j-1}, pooled over replicates
    per_replicate: list
    horizon: int


def two_walker_common_points(law: EnvironmentLaw, replicates: int = 1, master_seed=0, horizon: int = 10_000) -> CommonPoints:
    """Successive common points of two independent walks in one environment.

    d = 1 only.  Both walks start at 0 and are run past ``horizon``; the common
    points ``0 < L_1 < L_2 < ...`` inside ``[1, horizon]`` are returned as
    increments.  Raises :class:`HorizonExceeded` when a replicate has no
    common point in the window.
    """
    if law.dim != 1:
        raise ValueError("two-walker common points are defined for d = 1")
    per = []
    for r in range(replicates):
        env_key = _rng.derive_key(master_seed, r, 0)
        w1 = _rng.derive_key(master_seed, r, 1)
        w2 = _rng.derive_key(master_seed, r, 2)
        a = K.visited_1d(*_packed_args(law), _rng.key(env_key), _rng.key(w1), horizon)
        b = K.visited_1d(*_packed_args(law), _rng.key(env_key), _rng.key(w2), horizon)
        common = np.flatnonzero(a & b)
        common = common[common > 0]
        if common.size == 0:
            raise HorizonExceeded(f"no common point up to {horizon} in replicate {r}")
        per.append(np.diff(np.concatenate([[0], common])))
    return CommonPoints(np.concatenate(per), per, horizon)
