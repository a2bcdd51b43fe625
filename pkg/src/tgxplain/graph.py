"""Static road graph with a time series of node features.

The graph topology is fixed; only the per-node feature matrices evolve
over time. Files are plain CSV: an n x n adjacency matrix and a
T x n feature matrix (one feature per node, e.g. speed readings).
"""

from __future__ import annotations

import csv
import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParseError

# %.17g round-trips any float64 through text exactly
_FLOAT_FMT = "%.17g"


def atomic_savetxt(path, matrix) -> None:
    """Write a CSV matrix to a temp name, then rename into place."""
    tmp = f"{path}.tmp"
    np.savetxt(tmp, matrix, fmt=_FLOAT_FMT, delimiter=",")
    os.replace(tmp, path)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TimeWindow:
    """Inclusive range [start, end] of snapshot indices."""

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"window start {self.start} > end {self.end}")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def contains(self, other: "TimeWindow") -> bool:
        return self.start <= other.start and other.end <= self.end

    def strictly_contains(self, other: "TimeWindow") -> bool:
        return self.contains(other) and self != other

    def snapshots(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class TemporalGraph:
    """Fixed adjacency plus per-timestep node features.

    adjacency: (n, n) non-negative weights, zero diagonal allowed.
    features:  (T_total, n, f) reals; f is 1 for speed data.
    """

    adjacency: np.ndarray
    features: np.ndarray
    node_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.float64)
        feats = np.asarray(self.features, dtype=np.float64)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DimensionError(f"adjacency must be square, got {adj.shape}")
        if feats.ndim == 2:
            feats = feats[:, :, None]
        if feats.ndim != 3:
            raise DimensionError(f"features must be (T, n) or (T, n, f), got {feats.shape}")
        if feats.shape[1] != adj.shape[0]:
            raise DimensionError(
                f"feature column count {feats.shape[1]} != node count {adj.shape[0]}"
            )
        if not np.all(np.isfinite(adj)):
            raise ValueError("adjacency contains NaN or Inf")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain NaN or Inf")
        if np.any(adj < 0):
            raise ValueError("adjacency entries must be non-negative")
        if self.node_labels is not None and len(self.node_labels) != adj.shape[0]:
            raise DimensionError("one label per node required")
        object.__setattr__(self, "adjacency", _freeze(adj))
        object.__setattr__(self, "features", _freeze(feats))

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_steps(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[2]


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetrically degree-scaled propagation matrix with self loops."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", _freeze(np.asarray(self.matrix, dtype=np.float64)))


def _read_csv_matrix(path, header: bool = False) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader):
            if header and i == 0:
                continue
            if not row:
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise ParseError(f"{path}: line {i + 1}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DimensionError(f"{path}: line {i + 1} has {len(row)} cells, expected {width}")
    return np.array(rows, dtype=np.float64)


def load_dataset(
    adjacency_path,
    features_path,
    labels_path=None,
    header: bool = False,
) -> TemporalGraph:
    """Load an adjacency CSV and a features CSV into a validated graph.

    The adjacency file must be square (n rows of n numbers); the feature
    file must have exactly n columns, one row per timestep.
    """
    adj = _read_csv_matrix(adjacency_path, header=header)
    feats = _read_csv_matrix(features_path, header=header)
    if adj.shape[0] != adj.shape[1]:
        raise DimensionError(f"adjacency is {adj.shape[0]}x{adj.shape[1]}, must be square")
    if feats.shape[1] != adj.shape[0]:
        raise DimensionError(
            f"features have {feats.shape[1]} columns but adjacency has {adj.shape[0]} nodes"
        )
    labels = None
    if labels_path is not None:
        with open(labels_path) as fh:
            labels = tuple(line.rstrip("\n") for line in fh if line.strip())
    return TemporalGraph(adjacency=adj, features=feats, node_labels=labels)


def save_dataset(g: TemporalGraph, adjacency_path, features_path) -> None:
    """Write the graph back to CSV with round-trip-exact number formatting."""
    if g.feature_dim != 1:
        raise DimensionError("CSV feature files hold one feature per node")
    atomic_savetxt(adjacency_path, g.adjacency)
    atomic_savetxt(features_path, g.features[:, :, 0])


def normalize_adjacency(g: TemporalGraph) -> NormalizedAdjacency:
    """Return D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.

    Every row of A + I sums to at least 1 (the self loop), so the scaling
    is always defined.
    """
    a_tilde = g.adjacency + np.eye(g.n_nodes)
    deg = a_tilde.sum(axis=1)
    if np.any(deg <= 0):
        # unreachable: the identity guarantees deg >= 1
        raise ValueError("degree of A + I must be positive")
    inv_sqrt = 1.0 / np.sqrt(deg)
    return NormalizedAdjacency(matrix=a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :])


def k_hop_neighbors(g: TemporalGraph, node: int, k: int) -> list[int]:
    """All nodes within shortest-path distance <= k of `node`, excluding it.

    Edges are adjacency entries > 0, weights ignored. Result sorted ascending.
    """
    n = g.n_nodes
    if not 0 <= node < n:
        raise IndexError(f"node {node} out of range [0, {n})")
    if k <= 0:
        return []
    binary = g.adjacency > 0
    seen = {node}
    frontier = deque([(node, 0)])
    out = set()
    while frontier:
        v, dist = frontier.popleft()
        if dist == k:
            continue
        for u in np.flatnonzero(binary[v] | binary[:, v]):
            u = int(u)
            if u not in seen:
                seen.add(u)
                out.add(u)
                frontier.append((u, dist + 1))
    return sorted(out)
