"""Deterministic graph-GRU forecasting model and the oracle interface.

The model runs a gated recurrent update per timestep where each gate sees
the graph-convolved features of the current step, then reads out one value
per node with a shared linear head. The explainer treats it as a black box
through two calls: roll the recurrence over all but the last step to get a
hidden state, then predict from the last step's features under that frozen
hidden state.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ShapeError
from .graph import NormalizedAdjacency, _freeze

WEIGHTS_FORMAT_VERSION = 1


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class ModelWeights:
    """Gate and readout parameters, shared across nodes.

    Gate matrices act on the concatenation of graph-convolved features
    (width f) and the hidden state (width h).
    """

    w_u: np.ndarray
    w_r: np.ndarray
    w_c: np.ndarray
    b_u: np.ndarray
    b_r: np.ndarray
    b_c: np.ndarray
    w_o: np.ndarray
    b_o: float
    n_nodes: int
    window: int
    model_name: str = "embedded-gru"

    def __post_init__(self):
        for name in ("w_u", "w_r", "w_c", "b_u", "b_r", "b_c", "w_o"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains NaN or Inf")
            object.__setattr__(self, name, _freeze(arr))
        if self.w_u.ndim != 2 or self.w_u.shape[0] <= self.w_u.shape[1]:
            raise ShapeError(f"w_u must be (f + h, h) with f >= 1, got {self.w_u.shape}")
        h = self.hidden_dim
        f = self.feature_dim
        for name in ("w_r", "w_c"):
            if getattr(self, name).shape != (f + h, h):
                raise ShapeError(f"{name} must be ({f + h}, {h})")
        for name in ("b_u", "b_r", "b_c"):
            if getattr(self, name).shape != (h,):
                raise ShapeError(f"{name} must be ({h},)")
        if self.w_o.shape != (h,):
            raise ShapeError(f"w_o must be ({h},)")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")

    @property
    def hidden_dim(self) -> int:
        return np.asarray(self.w_u).shape[1]

    @property
    def feature_dim(self) -> int:
        return np.asarray(self.w_u).shape[0] - self.hidden_dim


def step(
    w: ModelWeights,
    a_hat: NormalizedAdjacency,
    x_t: np.ndarray,
    h_prev: np.ndarray,
) -> np.ndarray:
    """One recurrent update: gates computed from [A_hat @ x_t, h_prev].

    u = sigmoid([z, h] W_u + b_u)
    r = sigmoid([z, h] W_r + b_r)
    c = tanh([z, r*h] W_c + b_c)
    h' = u*h + (1 - u)*c
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    n = a_hat.matrix.shape[0]
    if x_t.shape != (n, w.feature_dim):
        raise ShapeError(f"x_t must be ({n}, {w.feature_dim}), got {x_t.shape}")
    if h_prev.shape != (n, w.hidden_dim):
        raise ShapeError(f"h_prev must be ({n}, {w.hidden_dim}), got {h_prev.shape}")
    z = a_hat.matrix @ x_t
    zh = np.concatenate([z, h_prev], axis=1)
    u = _sigmoid(zh @ w.w_u + w.b_u)
    r = _sigmoid(zh @ w.w_r + w.b_r)
    c = np.tanh(np.concatenate([z, r * h_prev], axis=1) @ w.w_c + w.b_c)
    return u * h_prev + (1.0 - u) * c


def hidden_state(
    w: ModelWeights, a_hat: NormalizedAdjacency, x_seq: np.ndarray
) -> np.ndarray:
    """Roll the recurrence over all but the last step, starting from zeros."""
    x_seq = np.asarray(x_seq, dtype=np.float64)
    if x_seq.ndim != 3:
        raise ShapeError(f"x_seq must be (T, n, f), got {x_seq.shape}")
    n = a_hat.matrix.shape[0]
    h = np.zeros((n, w.hidden_dim))
    for t in range(x_seq.shape[0] - 1):
        h = step(w, a_hat, x_seq[t], h)
    return h


def predict_with_hidden(
    w: ModelWeights,
    a_hat: NormalizedAdjacency,
    x_last: np.ndarray,
    h: np.ndarray,
) -> np.ndarray:
    """Per-node readout after one more recurrent step on the last features."""
    h_final = step(w, a_hat, x_last, h)
    return h_final @ w.w_o + w.b_o


def forward_full(
    w: ModelWeights, a_hat: NormalizedAdjacency, x_seq: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Full pass over a T-step sequence.

    Returns the prediction and the hidden state the last step saw, i.e. the
    state after consuming x_seq[:-1].
    """
    x_seq = np.asarray(x_seq, dtype=np.float64)
    if x_seq.ndim != 3 or x_seq.shape[0] < 1:
        raise ShapeError(f"x_seq must be (T>=1, n, f), got {x_seq.shape}")
    h = hidden_state(w, a_hat, x_seq)
    y = predict_with_hidden(w, a_hat, x_seq[-1], h)
    return y, h


def predict_with_hidden_batch(
    w: ModelWeights,
    a_hat: NormalizedAdjacency,
    x_batch: np.ndarray,
    h: np.ndarray,
) -> np.ndarray:
    """Vectorized readout for a stack of last-step feature matrices.

    Equivalent to calling predict_with_hidden per slice; broadcasting the
    shared hidden state keeps the perturbation loop out of Python.
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    if x_batch.ndim != 3:
        raise ShapeError(f"x_batch must be (S, n, f), got {x_batch.shape}")
    z = np.einsum("ij,sjf->sif", a_hat.matrix, x_batch)
    hb = np.broadcast_to(h, (x_batch.shape[0],) + h.shape)
    zh = np.concatenate([z, hb], axis=2)
    u = _sigmoid(zh @ w.w_u + w.b_u)
    r = _sigmoid(zh @ w.w_r + w.b_r)
    c = np.tanh(np.concatenate([z, r * hb], axis=2) @ w.w_c + w.b_c)
    h_final = u * hb + (1.0 - u) * c
    return h_final @ w.w_o + w.b_o


class ModelOracle(Protocol):
    """Black-box access to the model: frozen-state prediction plus metadata.

    Implementations must be pure; identical inputs yield identical outputs,
    and predict_with_hidden never mutates the hidden state it receives.
    """

    @property
    def n_nodes(self) -> int: ...

    @property
    def feature_dim(self) -> int: ...

    @property
    def window(self) -> int: ...

    @property
    def model_name(self) -> str: ...

    def hidden_state(self, x_seq: np.ndarray) -> np.ndarray: ...

    def predict_with_hidden(self, x_last: np.ndarray, h: np.ndarray) -> np.ndarray: ...

    def predict_with_hidden_batch(self, x_batch: np.ndarray, h: np.ndarray) -> np.ndarray: ...


class EmbeddedOracle:
    """In-process oracle over a weights object and a propagation matrix."""

    def __init__(self, weights: ModelWeights, a_hat: NormalizedAdjacency):
        if a_hat.matrix.shape[0] != weights.n_nodes:
            raise ShapeError(
                f"propagation matrix is {a_hat.matrix.shape[0]} nodes, "
                f"weights expect {weights.n_nodes}"
            )
        self.weights = weights
        self.a_hat = a_hat

    @property
    def n_nodes(self) -> int:
        return self.weights.n_nodes

    @property
    def feature_dim(self) -> int:
        return self.weights.feature_dim

    @property
    def window(self) -> int:
        return self.weights.window

    @property
    def model_name(self) -> str:
        return self.weights.model_name

    def hidden_state(self, x_seq):
        return hidden_state(self.weights, self.a_hat, x_seq)

    def predict_with_hidden(self, x_last, h):
        return predict_with_hidden(self.weights, self.a_hat, x_last, h)

    def predict_with_hidden_batch(self, x_batch, h):
        return predict_with_hidden_batch(self.weights, self.a_hat, x_batch, h)


def synth_model(
    n_nodes: int,
    feature_dim: int,
    hidden_dim: int,
    seed: int,
    window: int = 4,
    model_name: str = "synth-gru",
) -> ModelWeights:
    """Seeded pseudo-random weights, uniform in [-0.5, 0.5]."""
    if min(n_nodes, feature_dim, hidden_dim, window) < 1:
        raise ValueError("all dimensions must be positive")
    rng = np.random.default_rng(seed)
    fh = feature_dim + hidden_dim
    u = lambda *shape: rng.uniform(-0.5, 0.5, size=shape)
    return ModelWeights(
        w_u=u(fh, hidden_dim),
        w_r=u(fh, hidden_dim),
        w_c=u(fh, hidden_dim),
        b_u=u(hidden_dim),
        b_r=u(hidden_dim),
        b_c=u(hidden_dim),
        w_o=u(hidden_dim),
        b_o=float(u()),
        n_nodes=n_nodes,
        window=window,
        model_name=model_name,
    )


def weights_to_document(w: ModelWeights) -> dict:
    """Plain-JSON form of the weights; floats keep full precision."""

    def arr(a):
        a = np.asarray(a)
        return {"shape": list(a.shape), "data": a.tolist()}

    return {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "model_name": w.model_name,
        "n_nodes": w.n_nodes,
        "feature_dim": w.feature_dim,
        "hidden_dim": w.hidden_dim,
        "window": w.window,
        "arrays": {
            "w_u": arr(w.w_u),
            "w_r": arr(w.w_r),
            "w_c": arr(w.w_c),
            "b_u": arr(w.b_u),
            "b_r": arr(w.b_r),
            "b_c": arr(w.b_c),
            "w_o": arr(w.w_o),
        },
        "b_o": w.b_o,
    }


def weights_from_document(doc: dict) -> ModelWeights:
    version = doc.get("format_version")
    if version != WEIGHTS_FORMAT_VERSION:
        raise ValueError(f"unsupported weights format_version {version!r}")

    def arr(name):
        entry = doc["arrays"][name]
        a = np.array(entry["data"], dtype=np.float64)
        if list(a.shape) != list(entry["shape"]):
            raise ShapeError(f"{name}: declared shape {entry['shape']} != data {list(a.shape)}")
        return a

    return ModelWeights(
        w_u=arr("w_u"),
        w_r=arr("w_r"),
        w_c=arr("w_c"),
        b_u=arr("b_u"),
        b_r=arr("b_r"),
        b_c=arr("b_c"),
        w_o=arr("w_o"),
        b_o=float(doc["b_o"]),
        n_nodes=int(doc["n_nodes"]),
        window=int(doc["window"]),
        model_name=str(doc.get("model_name", "embedded-gru")),
    )


def save_weights(w: ModelWeights, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(weights_to_document(w), fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def load_weights(path) -> ModelWeights:
    with open(path) as fh:
        return weights_from_document(json.load(fh))
