"""Exact jump-chain simulation of joint rating paths and their stopping times.

Paths are stored in CSR form: the jumps of path ``p`` are
``times[offsets[p]:offsets[p + 1]]`` and ``states[...]``. Every transition of
the product chain is one event, so a common jump of two components shows up as
a single event index and coincidences are detected by index, never by
comparing float times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import _core
from ._core.rng import CHAIN_STREAM, path_seeds
from .errors import ValidationError
from .markov_copula import JointGenerator, component_values

INF = np.inf


class Closeout(IntEnum):
    """What happened at the first trigger time."""

    NONE = 0
    CPTY_DEFAULT = 1  # tau_R = tau_1 != tau_2
    INV_DEFAULT = 2  # tau_R = tau_2 != tau_1
    BOTH_DEFAULT = 3  # tau_R = tau_1 = tau_2
    TRIGGER = 4  # tau_R = non-default trigger time


@dataclass(frozen=True)
class TriggerLevels:
    K1: int
    K2: int

    def check(self, K: int, initial: tuple[int, ...]) -> "TriggerLevels":
        for name, lvl, x0 in (("K1", self.K1, initial[0]), ("K2", self.K2, initial[1])):
            if not 1 < lvl <= K:
                raise ValidationError(f"trigger {name}={lvl} outside 2..{K}")
            if not x0 < lvl:
                raise ValidationError(f"initial rating {x0} must be strictly better than trigger {name}={lvl}")
        return self


@dataclass(frozen=True)
class JumpTable:
    """Holding rates and cumulative destination probabilities per product state."""

    exit_rate: np.ndarray
    cum: np.ndarray

    @classmethod
    def from_generator(cls, a: np.ndarray) -> "JumpTable":
        a = np.asarray(a, dtype=float)
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        exit_rate = off.sum(axis=1)
        cum = np.zeros_like(off)
        for s in np.flatnonzero(exit_rate > 0):
            row = np.cumsum(off[s] / exit_rate[s])
            last = np.flatnonzero(off[s] > 0)[-1]
            row[last:] = 1.0
            cum[s] = row
        return cls(exit_rate, cum)


@dataclass(frozen=True)
class JointRatingPath:
    initial_state: int
    times: np.ndarray
    states: np.ndarray
    horizon: float
    K: int = 4
    n_components: int = 2

    @property
    def jumps(self) -> list[tuple[float, int]]:
        return list(zip(self.times.tolist(), self.states.tolist()))


@dataclass
class PathBatch:
    """Jump chains of many paths (CSR layout)."""

    offsets: np.ndarray
    times: np.ndarray
    states: np.ndarray
    initial: np.ndarray
    horizon: float
    K: int
    n_components: int
    path_index: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.offsets) - 1

    def path(self, i: int) -> JointRatingPath:
        sl = slice(self.offsets[i], self.offsets[i + 1])
        return JointRatingPath(
            int(self.initial[i]),
            self.times[sl].copy(),
            self.states[sl].copy(),
            self.horizon,
            self.K,
            self.n_components,
        )

    def states_at(self, query) -> np.ndarray:
        return _core.states_at(self.offsets, self.times, self.states, self.initial, np.asarray(query, dtype=float))

    def ratings_at(self, query, component: int) -> np.ndarray:
        return component_values(self.states_at(query), self.K, self.n_components, component)


@dataclass(frozen=True)
class StoppingTimes:
    """Stopping times of one path (``inf`` when not reached by the horizon)."""

    tau1: float
    tau2: float
    tau3: float
    tauR1: float
    tauR2: float
    tauR_hat1: float
    tauR_hat2: float
    tau: float
    tauR: float
    classification: Closeout


@dataclass
class StoppingBatch:
    """Vectorized stopping times; ``*_idx`` are global event indices (``-1`` never)."""

    tau1_idx: np.ndarray
    tau2_idx: np.ndarray
    tau3_idx: np.ndarray
    tauR1_idx: np.ndarray
    tauR2_idx: np.ndarray
    tauR_hat1_idx: np.ndarray
    tauR_hat2_idx: np.ndarray
    tau_idx: np.ndarray
    tauR_idx: np.ndarray
    classification: np.ndarray
    default_class: np.ndarray
    times: np.ndarray

    def time(self, idx: np.ndarray) -> np.ndarray:
        out = np.full(idx.shape, INF)
        ok = idx >= 0
        out[ok] = self.times[idx[ok]]
        return out

    def __getitem__(self, i: int) -> StoppingTimes:
        t = lambda name: float(self.time(np.atleast_1d(getattr(self, name + "_idx")[i]))[0])  # noqa: E731
        return StoppingTimes(
            tau1=t("tau1"),
            tau2=t("tau2"),
            tau3=t("tau3"),
            tauR1=t("tauR1"),
            tauR2=t("tauR2"),
            tauR_hat1=t("tauR_hat1"),
            tauR_hat2=t("tauR_hat2"),
            tau=t("tau"),
            tauR=t("tauR"),
            classification=Closeout(int(self.classification[i])),
        )


def _min_idx(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    big = np.iinfo(np.int64).max
    m = np.minimum(np.where(a < 0, big, a), np.where(b < 0, big, b))
    return np.where(m == big, -1, m)


def _classify(at: np.ndarray, e1: np.ndarray, e2: np.ndarray) -> np.ndarray:
    hit1 = (at >= 0) & (e1 == at)
    hit2 = (at >= 0) & (e2 == at)
    out = np.where(at >= 0, Closeout.TRIGGER, Closeout.NONE).astype(np.int8)
    out[hit1 & ~hit2] = Closeout.CPTY_DEFAULT
    out[hit2 & ~hit1] = Closeout.INV_DEFAULT
    out[hit1 & hit2] = Closeout.BOTH_DEFAULT
    return out


def simulate_paths(
    g: JointGenerator,
    initial: int,
    horizon: float,
    base_seed: int,
    path_index,
    table: JumpTable | None = None,
) -> PathBatch:
    """Simulate paths ``path_index`` of the rating stream for ``base_seed``."""
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    if not 0 <= int(initial) < g.n_states:
        raise ValidationError(f"initial state {initial} outside 0..{g.n_states - 1}")
    table = table or JumpTable.from_generator(g.a)
    idx = np.atleast_1d(np.asarray(path_index, dtype=np.int64))
    seeds = path_seeds(base_seed, idx, CHAIN_STREAM)
    init = np.full(len(idx), int(initial), dtype=np.int64)
    off, times, states = _core.simulate_chains(table.cum, table.exit_rate, init, float(horizon), seeds)
    return PathBatch(off, times, states, init, float(horizon), g.scale.K, g.n_components, idx)


def simulate_path(g: JointGenerator, initial: int, horizon: float, seed: int, path_index: int = 0) -> JointRatingPath:
    """One path; identical to path ``path_index`` of :func:`simulate_paths` with the same seed."""
    return simulate_paths(g, initial, horizon, seed, [path_index]).path(0)


def stopping_times(batch: PathBatch, triggers: TriggerLevels) -> StoppingBatch:
    """First-passage scan of every path for default and trigger times."""
    K, n = batch.K, batch.n_components
    if not (1 < triggers.K1 <= K and 1 < triggers.K2 <= K):
        raise ValidationError(f"trigger levels must lie in 2..{K}")
    ge1, band1 = _core.first_passage(batch.offsets, batch.states, K, n, 0)
    ge2, band2 = _core.first_passage(batch.offsets, batch.states, K, n, 1)
    if n >= 3:
        ge3, _ = _core.first_passage(batch.offsets, batch.states, K, n, 2)
        tau3 = ge3[:, K]
    else:
        tau3 = np.full(len(batch), -1, dtype=np.int64)
    tau1, tau2 = ge1[:, K], ge2[:, K]
    tauR1, tauR2 = ge1[:, triggers.K1], ge2[:, triggers.K2]
    tau_idx = _min_idx(tau1, tau2)
    tauR_idx = _min_idx(tauR1, tauR2)
    return StoppingBatch(
        tau1_idx=tau1,
        tau2_idx=tau2,
        tau3_idx=tau3,
        tauR1_idx=tauR1,
        tauR2_idx=tauR2,
        tauR_hat1_idx=band1[:, triggers.K1],
        tauR_hat2_idx=band2[:, triggers.K2],
        tau_idx=tau_idx,
        tauR_idx=tauR_idx,
        classification=_classify(tauR_idx, tau1, tau2),
        default_class=_classify(tau_idx, tau1, tau2),
        times=batch.times,
    )


def extract_stopping_times(path: JointRatingPath, triggers: TriggerLevels, horizon: float | None = None) -> StoppingTimes:
    """Stopping times of a single path, ignoring jumps after ``horizon``."""
    horizon = path.horizon if horizon is None else float(horizon)
    times = np.asarray(path.times, dtype=float)
    keep = times <= horizon
    batch = PathBatch(
        np.array([0, int(keep.sum())], dtype=np.int64),
        times[keep],
        np.asarray(path.states, dtype=np.int64)[keep],
        np.array([path.initial_state], dtype=np.int64),
        horizon,
        path.K,
        path.n_components,
    )
    return stopping_times(batch, triggers)[0]


def dump_paths_csv(batch: PathBatch, fh) -> None:
    """Write ``path_id,time,state`` rows; time 0 carries the initial state."""
    fh.write("path_id,time,state\n")
    ids = batch.path_index if batch.path_index is not None else np.arange(len(batch))
    for p in range(len(batch)):
        fh.write(f"{ids[p]},0,{batch.initial[p]}\n")
        for e in range(batch.offsets[p], batch.offsets[p + 1]):
            fh.write(f"{ids[p]},{batch.times[e]!r},{batch.states[e]}\n")
