"""Torch graph-GRU matching the explainer's weights document semantics.

Each step graph-convolves the current features with the degree-scaled
adjacency (self loops added), feeds the result with the hidden state
through update/reset gates, and blends a tanh candidate:

    z  = A_hat @ x
    u  = sigmoid([z, h] W_u + b_u)
    r  = sigmoid([z, h] W_r + b_r)
    c  = tanh([z, r * h] W_c + b_c)
    h' = u * h + (1 - u) * c
    y  = h' @ w_o + b_o

where A_hat = D^{-1/2} (A + I) D^{-1/2}, D the degree matrix of A + I.
When loading a shared weights document everything runs in float64 so the
numbers agree with the document's producer to machine precision.
"""

from __future__ import annotations

import csv
import json

import numpy as np
import torch

WEIGHTS_FORMAT_VERSION = 1


def load_adjacency_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(cell) for cell in row] for row in csv.reader(fh) if row]
    adj = np.array(rows, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError(f"adjacency must be square, got {adj.shape}")
    return adj


def load_features_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(cell) for cell in row] for row in csv.reader(fh) if row]
    return np.array(rows, dtype=np.float64)[:, :, None]


def normalized_adjacency(adj: np.ndarray) -> np.ndarray:
    a_tilde = adj + np.eye(adj.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]


class GraphGRU(torch.nn.Module):
    """The recurrent cell with a per-node linear readout."""

    def __init__(self, n_nodes, feature_dim, hidden_dim, window,
                 a_hat, model_name="torch-graph-gru", dtype=torch.float64):
        super().__init__()
        self.n_nodes = n_nodes
        self.feature_dim = feature_dim
        self.hidden_dim = hidden_dim
        self.window = window
        self.model_name = model_name
        self.register_buffer("a_hat", torch.as_tensor(a_hat, dtype=dtype))
        fh = feature_dim + hidden_dim
        mk = lambda *shape: torch.nn.Parameter(torch.zeros(*shape, dtype=dtype))
        self.w_u, self.w_r, self.w_c = mk(fh, hidden_dim), mk(fh, hidden_dim), mk(fh, hidden_dim)
        self.b_u, self.b_r, self.b_c = mk(hidden_dim), mk(hidden_dim), mk(hidden_dim)
        self.w_o = mk(hidden_dim)
        self.b_o = mk(())

    def step(self, x, h):
        """One update; x is (..., n, f), h is (..., n, hidden)."""
        z = torch.matmul(self.a_hat, x)
        zh = torch.cat([z, h], dim=-1)
        u = torch.sigmoid(torch.matmul(zh, self.w_u) + self.b_u)
        r = torch.sigmoid(torch.matmul(zh, self.w_r) + self.b_r)
        c = torch.tanh(torch.matmul(torch.cat([z, r * h], dim=-1), self.w_c) + self.b_c)
        return u * h + (1.0 - u) * c

    def hidden_state(self, x_seq):
        """Roll over all but the last step from zeros; x_seq is (T, n, f)."""
        h = torch.zeros(
            x_seq.shape[:-3] + (self.n_nodes, self.hidden_dim),
            dtype=x_seq.dtype, device=x_seq.device,
        )
        for t in range(x_seq.shape[-3] - 1):
            h = self.step(x_seq[..., t, :, :], h)
        return h

    def predict_with_hidden(self, x_last, h):
        h_final = self.step(x_last, h)
        return torch.matmul(h_final, self.w_o) + self.b_o

    def forward(self, x_seq):
        h = self.hidden_state(x_seq)
        return self.predict_with_hidden(x_seq[..., -1, :, :], h)


def from_weights_document(path, adjacency_path) -> GraphGRU:
    """Instantiate the float64 cell from a shared weights document."""
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != WEIGHTS_FORMAT_VERSION:
        raise ValueError(f"unsupported weights format_version {version!r}")
    adj = load_adjacency_csv(adjacency_path)
    if adj.shape[0] != int(doc["n_nodes"]):
        raise ValueError(
            f"adjacency has {adj.shape[0]} nodes, weights expect {doc['n_nodes']}"
        )
    cell = GraphGRU(
        n_nodes=int(doc["n_nodes"]),
        feature_dim=int(doc["feature_dim"]),
        hidden_dim=int(doc["hidden_dim"]),
        window=int(doc["window"]),
        a_hat=normalized_adjacency(adj),
        model_name=str(doc.get("model_name", "shared-weights")),
    )
    arrays = doc["arrays"]
    with torch.no_grad():
        for name in ("w_u", "w_r", "w_c", "b_u", "b_r", "b_c"):
            entry = arrays[name]
            value = torch.tensor(entry["data"], dtype=torch.float64)
            if list(value.shape) != list(entry["shape"]):
                raise ValueError(f"{name}: declared shape mismatch")
            getattr(cell, name).copy_(value)
        cell.w_o.copy_(torch.tensor(arrays["w_o"]["data"], dtype=torch.float64))
        cell.b_o.copy_(torch.tensor(float(doc["b_o"]), dtype=torch.float64))
    cell.eval()
    return cell


def save_checkpoint(cell: GraphGRU, adjacency: np.ndarray, path) -> None:
    torch.save(
        {
            "format": "tgx-adapter-checkpoint",
            "n_nodes": cell.n_nodes,
            "feature_dim": cell.feature_dim,
            "hidden_dim": cell.hidden_dim,
            "window": cell.window,
            "model_name": cell.model_name,
            "adjacency": np.asarray(adjacency),
            "state": cell.state_dict(),
        },
        path,
    )


def from_checkpoint(path) -> GraphGRU:
    blob = torch.load(path, weights_only=False)
    if blob.get("format") != "tgx-adapter-checkpoint":
        raise ValueError("not an adapter checkpoint")
    cell = GraphGRU(
        n_nodes=blob["n_nodes"],
        feature_dim=blob["feature_dim"],
        hidden_dim=blob["hidden_dim"],
        window=blob["window"],
        a_hat=normalized_adjacency(np.asarray(blob["adjacency"])),
        model_name=blob.get("model_name", "checkpoint"),
    )
    cell.load_state_dict(blob["state"])
    cell.eval()
    return cell
