import numpy as np
import pytest

from tgxplain.graph import TemporalGraph, normalize_adjacency
from tgxplain.model import EmbeddedOracle, synth_model


def ring_graph(n=6, t_total=20, seed=0, level=1.0, noise=0.05):
    rng = np.random.default_rng(seed)
    adj = np.zeros((n, n))
    for i in range(n):
        adj[i, (i + 1) % n] = adj[(i + 1) % n, i] = 1.0
    feats = rng.normal(level, noise, size=(t_total, n, 1))
    return TemporalGraph(adjacency=adj, features=feats)


def path_graph(n=3, t_total=8):
    adj = np.zeros((n, n))
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = 1.0
    feats = np.ones((t_total, n, 1))
    return TemporalGraph(adjacency=adj, features=feats)


@pytest.fixture
def small_graph():
    return ring_graph()


@pytest.fixture
def small_oracle(small_graph):
    w = synth_model(small_graph.n_nodes, 1, 4, seed=3, window=3)
    return EmbeddedOracle(w, normalize_adjacency(small_graph))
