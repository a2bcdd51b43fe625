"""Seeded synthetic instances with a planted time-windowed dependency.

The generator emits a small ring-with-chords road graph, a feature series,
and random model weights. One designated neighbor of the target carries a
large alternating swing during a chosen snapshot window; everywhere else
its feature sits at its series mean, so mean-replacement perturbs nothing.
Inside the window the swing makes the target's prediction react to that
neighbor, which is the dependency the discovery stage should recover.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import TemporalGraph, TimeWindow
from .model import ModelWeights, synth_model


@dataclass(frozen=True)
class SynthSpec:
    n_nodes: int = 8
    t_total: int = 43
    window: int = 4
    hidden_dim: int = 6
    target: int = 0
    active_start: int = 10
    active_end: int = 20
    burst: float = 3.0
    base_level: float = 1.0
    noise: float = 0.02
    extra_edges: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 3:
            raise ValueError("need at least 3 nodes for a ring")
        if not 0 <= self.active_start <= self.active_end:
            raise ValueError("bad active window")
        if self.active_end + self.window > self.t_total:
            raise ValueError("active window does not fit the feature series")
        if not 0 <= self.target < self.n_nodes:
            raise IndexError("target out of range")

    @property
    def active_window(self) -> TimeWindow:
        return TimeWindow(self.active_start, self.active_end)

    @property
    def interval(self) -> TimeWindow:
        """Largest snapshot interval the series can host."""
        return TimeWindow(0, self.t_total - self.window)


def ring_adjacency(n: int, extra_edges: int, rng: np.random.Generator) -> np.ndarray:
    adj = np.zeros((n, n))
    for i in range(n):
        adj[i, (i + 1) % n] = adj[(i + 1) % n, i] = 1.0
    added = 0
    attempts = 0
    while added < extra_edges and attempts < 10 * n * n:
        attempts += 1
        i, j = rng.integers(0, n, size=2)
        if i != j and adj[i, j] == 0:
            adj[i, j] = adj[j, i] = 1.0
            added += 1
    return adj


def synth_instance(spec: SynthSpec) -> tuple[TemporalGraph, ModelWeights, dict]:
    """Build graph, features, and weights; returns the planted truth as a dict."""
    rng = np.random.default_rng(spec.seed)
    adj = ring_adjacency(spec.n_nodes, spec.extra_edges, rng)
    influencer = (spec.target + 1) % spec.n_nodes

    # smooth low-amplitude wiggle per node so columns are not constant
    steps = np.arange(spec.t_total)
    phases = rng.uniform(0, 2 * np.pi, size=spec.n_nodes)
    periods = rng.uniform(8.0, 20.0, size=spec.n_nodes)
    feats = spec.base_level + spec.noise * np.sin(
        2 * np.pi * steps[:, None] / periods[None, :] + phases[None, :]
    )

    # zero-sum alternating swing on the influencer, aligned so the swing
    # lands on the last model step of each active snapshot
    lo = spec.active_start + spec.window - 1
    hi = spec.active_end + spec.window - 1
    swing = spec.burst * np.array([(-1.0) ** k for k in range(hi - lo + 1)])
    swing -= swing.mean()
    feats[lo : hi + 1, influencer] += swing

    g = TemporalGraph(adjacency=adj, features=feats[:, :, None])
    weights = synth_model(
        spec.n_nodes,
        1,
        spec.hidden_dim,
        seed=spec.seed + 1,
        window=spec.window,
        model_name=f"synth-gru-s{spec.seed}",
    )
    truth = {
        "target": spec.target,
        "influencer": int(influencer),
        "active_window": [spec.active_start, spec.active_end],
        "burst": spec.burst,
        "seed": spec.seed,
        "n_nodes": spec.n_nodes,
        "t_total": spec.t_total,
        "window": spec.window,
    }
    return g, weights, truth
