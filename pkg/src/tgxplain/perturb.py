"""Perturbation datasets recorded under a frozen hidden state.

For one snapshot t the model's hidden state is computed once from the
unperturbed sequence, then the last step's features are perturbed many
times. Each sample stores, per candidate node, a three-valued code

    e = s + q,   s = 1 if the node was perturbed, q = 1 if the node's
                 prediction moved by more than the change threshold,

so e is 0 (untouched, unchanged), 1 (one of the two), or 2 (both).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import RangeError, ShapeError
from .graph import TemporalGraph, TimeWindow, _freeze
from .model import ModelOracle

_MASK64 = (1 << 64) - 1

MODES = ("mean-replace", "zero-replace")


@dataclass(frozen=True)
class PerturbationConfig:
    num_samples: int = 1000
    perturb_prob: float = 0.2
    change_threshold: float = 0.01
    mode: str = "mean-replace"
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be positive")
        if not 0.0 < self.perturb_prob < 1.0:
            raise ValueError("perturb_prob must lie in (0, 1)")
        if self.change_threshold < 0.0:
            raise ValueError("change_threshold must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def to_dict(self) -> dict:
        return {
            "num_samples": self.num_samples,
            "perturb_prob": self.perturb_prob,
            "change_threshold": self.change_threshold,
            "mode": self.mode,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbationConfig":
        return cls(
            num_samples=int(d["num_samples"]),
            perturb_prob=float(d["perturb_prob"]),
            change_threshold=float(d["change_threshold"]),
            mode=str(d["mode"]),
            rng_seed=int(d["rng_seed"]),
        )


@dataclass(frozen=True)
class SnapshotDataset:
    """Per-snapshot perturbation outcomes over a fixed variable ordering."""

    t: int
    target: int
    variables: tuple[int, ...]
    realizations: np.ndarray
    seed_matrix: np.ndarray
    cfg: PerturbationConfig
    mean_range: tuple[int, int] | None = None

    def __post_init__(self):
        real = np.asarray(self.realizations, dtype=np.uint8)
        seeds = np.asarray(self.seed_matrix, dtype=np.uint8)
        m = len(self.variables)
        if real.shape != (self.cfg.num_samples, m) or seeds.shape != real.shape:
            raise ShapeError("realizations and seeds must be (num_samples, |variables|)")
        if real.max(initial=0) > 2 or seeds.max(initial=0) > 1:
            raise ValueError("realization codes must be in {0,1,2}, seeds in {0,1}")
        if np.any(real.astype(np.int16) - seeds < 0):
            raise ValueError("realization minus seed must be a 0/1 change indicator")
        if self.target not in self.variables:
            raise ValueError("target must be one of the variables")
        object.__setattr__(self, "realizations", _freeze(real))
        object.__setattr__(self, "seed_matrix", _freeze(seeds))
        object.__setattr__(self, "variables", tuple(int(v) for v in self.variables))

    @property
    def num_samples(self) -> int:
        return self.realizations.shape[0]

    def column(self, node: int) -> int:
        return self.variables.index(node)


@dataclass(frozen=True)
class TemporalDataset:
    """One SnapshotDataset per snapshot of the explained interval."""

    interval: TimeWindow
    target: int
    variables: tuple[int, ...]
    snapshots: dict[int, SnapshotDataset] = field(repr=False)

    def __post_init__(self):
        for t in self.interval.snapshots():
            if t not in self.snapshots:
                raise RangeError(f"missing snapshot dataset for t={t}")
            d = self.snapshots[t]
            if d.variables != tuple(self.variables) or d.target != self.target:
                raise ValueError("snapshots must share one variable ordering and target")
        object.__setattr__(self, "variables", tuple(int(v) for v in self.variables))

    def snapshot(self, t: int) -> SnapshotDataset:
        if t not in self.snapshots:
            raise RangeError(f"no dataset for snapshot {t}")
        return self.snapshots[t]


_MIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_M1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(x):
    """SplitMix64 finalizer; avalanche over uint64 scalars or arrays.

    Wraparound is the point, so overflow warnings are silenced.
    """
    with np.errstate(over="ignore"):
        z = x + _MIX_GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX_M1
        z = (z ^ (z >> np.uint64(27))) * _MIX_M2
        return z ^ (z >> np.uint64(31))


def _uniforms(rng_seed: int, t: int, samples, n_vars: int) -> np.ndarray:
    """Keyed counter-based uniforms in [0, 1).

    The word at (sample i, variable j) depends only on (rng_seed, t, i, j),
    so any sample row, or a whole snapshot, regenerates in isolation.
    """
    key = _mix64(_mix64(np.uint64(rng_seed & _MASK64)) ^ np.uint64(t & _MASK64))
    rows = _mix64(key ^ np.asarray(samples, dtype=np.uint64))[:, None]
    cols = _mix64(np.arange(n_vars, dtype=np.uint64))[None, :]
    words = _mix64(rows ^ cols)
    return (words >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def draw_seed_row(rng_seed: int, perturb_prob: float, t: int, sample_index: int, n_vars: int) -> np.ndarray:
    """One sample's perturbation seeds, regenerated in isolation."""
    u = _uniforms(rng_seed, t, [sample_index], n_vars)
    return (u[0] < perturb_prob).astype(np.uint8)


def draw_seed_matrix(cfg: PerturbationConfig, t: int, n_vars: int) -> np.ndarray:
    """All perturbation seeds for one snapshot, (num_samples, n_vars) in {0,1}."""
    u = _uniforms(cfg.rng_seed, t, np.arange(cfg.num_samples), n_vars)
    return (u < cfg.perturb_prob).astype(np.uint8)


def perturb_features(
    g: TemporalGraph,
    t_last: int,
    variables,
    seeds,
    mode: str = "mean-replace",
    mean_range: tuple[int, int] | None = None,
) -> np.ndarray:
    """Copy of the features at t_last with seeded variable nodes replaced.

    mean-replace substitutes each seeded node's temporal mean over
    mean_range (inclusive, defaulting to the whole series); zero-replace
    writes zeros. Non-variable nodes are never touched.
    """
    if not 0 <= t_last < g.n_steps:
        raise IndexError(f"t_last {t_last} out of range [0, {g.n_steps})")
    variables = list(variables)
    seeds = np.asarray(seeds, dtype=np.uint8)
    if seeds.shape != (len(variables),):
        raise ShapeError("one seed per variable required")
    x = g.features[t_last].copy()
    if mode == "mean-replace":
        lo, hi = mean_range if mean_range is not None else (0, g.n_steps - 1)
        if not (0 <= lo <= hi < g.n_steps):
            raise RangeError(f"mean range [{lo}, {hi}] outside feature series")
        replacement = g.features[lo : hi + 1].mean(axis=0)
    elif mode == "zero-replace":
        replacement = np.zeros_like(x)
    else:
        raise ValueError(f"unknown perturbation mode {mode!r}")
    for j, node in enumerate(variables):
        if seeds[j]:
            x[node] = replacement[node]
    return x


def prediction_changed(y_orig, y_pert, threshold: float) -> np.ndarray:
    """1 where |y_pert - y_orig| strictly exceeds the threshold."""
    y_orig = np.asarray(y_orig, dtype=np.float64)
    y_pert = np.asarray(y_pert, dtype=np.float64)
    if y_orig.shape != y_pert.shape:
        raise ShapeError(f"prediction shapes differ: {y_orig.shape} vs {y_pert.shape}")
    return (np.abs(y_pert - y_orig) > threshold).astype(np.uint8)


def _predict_batch(oracle: ModelOracle, x_batch: np.ndarray, h: np.ndarray) -> np.ndarray:
    batch = getattr(oracle, "predict_with_hidden_batch", None)
    if batch is not None:
        return np.asarray(batch(x_batch, h))
    return np.stack([np.asarray(oracle.predict_with_hidden(x, h)) for x in x_batch])


def generate_snapshot_dataset(
    oracle: ModelOracle,
    g: TemporalGraph,
    t: int,
    target: int,
    variables,
    cfg: PerturbationConfig,
    mean_range: tuple[int, int] | None = None,
) -> SnapshotDataset:
    """Perturbation dataset for snapshot t under the frozen hidden state.

    The hidden state is computed exactly once from the unperturbed
    sequence; every sample reuses it. mean_range defaults to the model
    window of this one snapshot.
    """
    variables = [int(v) for v in variables]
    if not variables:
        raise ValueError("variables must be nonempty")
    if target not in variables:
        raise ValueError("target must be among the variables")
    T = oracle.window
    if t < 0 or t + T > g.n_steps:
        raise RangeError(f"snapshot {t} needs steps [{t}, {t + T - 1}], have {g.n_steps}")
    if mean_range is None:
        mean_range = (t, t + T - 1)

    x_seq = g.features[t : t + T]
    h = oracle.hidden_state(x_seq)
    x_last = x_seq[-1]
    y_orig = np.asarray(oracle.predict_with_hidden(x_last, h))

    seeds = draw_seed_matrix(cfg, t, len(variables))

    if cfg.mode == "mean-replace":
        lo, hi = mean_range
        if not (0 <= lo <= hi < g.n_steps):
            raise RangeError(f"mean range [{lo}, {hi}] outside feature series")
        replacement = g.features[lo : hi + 1].mean(axis=0)
    else:
        replacement = np.zeros_like(x_last)

    x_batch = np.repeat(x_last[None, :, :], cfg.num_samples, axis=0)
    for j, node in enumerate(variables):
        rows = seeds[:, j].astype(bool)
        x_batch[rows, node, :] = replacement[node]

    y_pert = _predict_batch(oracle, x_batch, h)
    cols = np.asarray(variables)
    diffs = np.abs(y_pert[:, cols] - y_orig[cols])
    q = (diffs > cfg.change_threshold).astype(np.uint8)

    return SnapshotDataset(
        t=t,
        target=int(target),
        variables=tuple(variables),
        realizations=seeds + q,
        seed_matrix=seeds,
        cfg=cfg,
        mean_range=tuple(mean_range),
    )


def generate_temporal_dataset(
    oracle: ModelOracle,
    g: TemporalGraph,
    interval: TimeWindow,
    target: int,
    variables,
    cfg: PerturbationConfig,
) -> TemporalDataset:
    """One snapshot dataset per t in the interval, independent seed streams.

    Mean replacement uses one shared range covering the whole interval plus
    the model window, so replacement values are comparable across snapshots.
    """
    T = oracle.window
    if interval.start < 0 or interval.end + T > g.n_steps:
        raise RangeError(
            f"interval [{interval.start}, {interval.end}] with window {T} "
            f"does not fit in {g.n_steps} steps"
        )
    mean_range = (interval.start, interval.end + T - 1)
    snapshots = {
        t: generate_snapshot_dataset(oracle, g, t, target, variables, cfg, mean_range)
        for t in interval.snapshots()
    }
    return TemporalDataset(
        interval=interval,
        target=int(target),
        variables=tuple(int(v) for v in variables),
        snapshots=snapshots,
    )


# ---------------------------------------------------------------------------
# file round trip: one realization CSV per snapshot plus a metadata sidecar


def save_snapshot_dataset(d: SnapshotDataset, csv_path, meta_path) -> None:
    tmp_csv = f"{csv_path}.tmp"
    with open(tmp_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(d.variables)
        writer.writerows(d.realizations.tolist())
    meta = {
        "t": d.t,
        "target": d.target,
        "variables": list(d.variables),
        "cfg": d.cfg.to_dict(),
        "mean_range": list(d.mean_range) if d.mean_range else None,
    }
    tmp_meta = f"{meta_path}.tmp"
    with open(tmp_meta, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp_csv, csv_path)
    os.replace(tmp_meta, meta_path)


def load_snapshot_dataset(csv_path, meta_path) -> SnapshotDataset:
    """Rebuild a snapshot dataset; seeds are regenerated from the config echo."""
    with open(meta_path) as fh:
        meta = json.load(fh)
    cfg = PerturbationConfig.from_dict(meta["cfg"])
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        variables = tuple(int(v) for v in header)
        rows = [[int(c) for c in row] for row in reader if row]
    real = np.array(rows, dtype=np.uint8)
    seeds = draw_seed_matrix(cfg, int(meta["t"]), len(variables))
    mean_range = meta.get("mean_range")
    return SnapshotDataset(
        t=int(meta["t"]),
        target=int(meta["target"]),
        variables=variables,
        realizations=real,
        seed_matrix=seeds,
        cfg=cfg,
        mean_range=tuple(mean_range) if mean_range else None,
    )
