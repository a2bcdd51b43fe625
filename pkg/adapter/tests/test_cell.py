import json

import numpy as np
import pytest
import torch

from tgx_adapter.cell import (
    from_checkpoint,
    from_weights_document,
    load_adjacency_csv,
    normalized_adjacency,
    save_checkpoint,
)


def test_normalized_adjacency_hand_value():
    adj = np.array([[0.0, 1.0], [1.0, 0.0]])
    out = normalized_adjacency(adj)
    assert np.allclose(out, 0.5 * np.ones((2, 2)), atol=1e-15)


def test_weights_document_loads(instance):
    cell = from_weights_document(instance / "weights.json", instance / "adjacency.csv")
    assert cell.n_nodes == 6
    assert cell.feature_dim == 1
    assert cell.window == 4
    doc = json.loads((instance / "weights.json").read_text())
    assert torch.allclose(
        cell.w_u, torch.tensor(doc["arrays"]["w_u"]["data"], dtype=torch.float64)
    )


def test_version_gate(tmp_path, instance):
    doc = json.loads((instance / "weights.json").read_text())
    doc["format_version"] = 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        from_weights_document(bad, instance / "adjacency.csv")


def test_node_count_mismatch(tmp_path, instance):
    small = tmp_path / "small.csv"
    small.write_text("0,1\n1,0\n")
    with pytest.raises(ValueError):
        from_weights_document(instance / "weights.json", small)


def test_zero_state_rollout_shapes(instance):
    cell = from_weights_document(instance / "weights.json", instance / "adjacency.csv")
    x_seq = torch.rand(4, 6, 1, dtype=torch.float64)
    h = cell.hidden_state(x_seq)
    assert h.shape == (6, cell.hidden_dim)
    y = cell.predict_with_hidden(x_seq[-1], h)
    assert y.shape == (6,)
    # recurrence is pure: same inputs, same outputs
    assert torch.equal(h, cell.hidden_state(x_seq))


def test_checkpoint_round_trip(tmp_path, instance):
    cell = from_weights_document(instance / "weights.json", instance / "adjacency.csv")
    adj = load_adjacency_csv(instance / "adjacency.csv")
    path = tmp_path / "model.pt"
    save_checkpoint(cell, adj, path)
    back = from_checkpoint(path)
    x_seq = torch.rand(4, 6, 1, dtype=torch.float64)
    assert torch.equal(cell(x_seq), back(x_seq))
    assert back.model_name == cell.model_name
