"""Toy next-step training for the graph-GRU on synthetic CSV data.

Adam with learning rate 0.001 and batch size 64, a handful of epochs;
enough to prove the checkpoint path works end to end, not to chase
forecasting accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .cell import (
    GraphGRU,
    load_adjacency_csv,
    load_features_csv,
    normalized_adjacency,
    save_checkpoint,
)


@dataclass
class TrainConfig:
    adjacency_path: str
    features_path: str
    out_path: str
    window: int = 4
    hidden_dim: int = 6
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 0.001
    seed: int = 0


def sliding_windows(features: np.ndarray, window: int):
    """(X of (B, T, n, f), y of (B, n)) next-step pairs over the series."""
    T_total = features.shape[0]
    xs, ys = [], []
    for t in range(T_total - window):
        xs.append(features[t : t + window])
        ys.append(features[t + window, :, 0])
    return np.stack(xs), np.stack(ys)


def train_toy(cfg: TrainConfig) -> dict:
    """Train, save a checkpoint, and report first/last epoch losses."""
    torch.manual_seed(cfg.seed)
    adj = load_adjacency_csv(cfg.adjacency_path)
    features = load_features_csv(cfg.features_path)
    if features.shape[0] <= cfg.window:
        raise ValueError("feature series shorter than one training window")
    xs, ys = sliding_windows(features, cfg.window)
    x = torch.as_tensor(xs)
    y = torch.as_tensor(ys)

    cell = GraphGRU(
        n_nodes=adj.shape[0],
        feature_dim=features.shape[2],
        hidden_dim=cfg.hidden_dim,
        window=cfg.window,
        a_hat=normalized_adjacency(adj),
        model_name=f"toy-trained-s{cfg.seed}",
    )
    with torch.no_grad():
        for p in cell.parameters():
            p.uniform_(-0.5, 0.5)

    optim = torch.optim.Adam(cell.parameters(), lr=cfg.learning_rate)
    loss_fn = torch.nn.MSELoss()
    n = x.shape[0]
    losses = []
    for _ in range(cfg.epochs):
        perm = torch.randperm(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            optim.zero_grad()
            pred = cell(x[idx])
            loss = loss_fn(pred, y[idx])
            loss.backward()
            optim.step()
            epoch_loss += loss.item() * len(idx)
        losses.append(epoch_loss / n)

    cell.eval()
    save_checkpoint(cell, adj, cfg.out_path)
    return {
        "epochs": cfg.epochs,
        "first_loss": losses[0],
        "final_loss": losses[-1],
        "checkpoint": str(cfg.out_path),
    }
