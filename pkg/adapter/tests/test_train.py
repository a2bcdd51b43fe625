import pytest

from tgx_adapter.cell import from_checkpoint
from tgx_adapter.serve import answer
from tgx_adapter.train import TrainConfig, train_toy


@pytest.fixture(scope="module")
def trained(tmp_path_factory, instance):
    out = tmp_path_factory.mktemp("ckpt") / "model.pt"
    report = train_toy(
        TrainConfig(
            adjacency_path=str(instance / "adjacency.csv"),
            features_path=str(instance / "features.csv"),
            out_path=str(out),
            epochs=50,
            seed=0,
        )
    )
    return out, report


def test_loss_decreases(trained):
    _, report = trained
    assert report["final_loss"] < report["first_loss"]


def test_seeded_run_reproducible(tmp_path, instance, trained):
    _, report = trained
    again = train_toy(
        TrainConfig(
            adjacency_path=str(instance / "adjacency.csv"),
            features_path=str(instance / "features.csv"),
            out_path=str(tmp_path / "again.pt"),
            epochs=50,
            seed=0,
        )
    )
    assert abs(again["final_loss"] - report["final_loss"]) < 1e-3


def test_checkpoint_serves_handshake(trained):
    path, _ = trained
    cell = from_checkpoint(path)
    resp, _ = answer(cell, '{"op": "handshake", "id": 0}')
    assert resp["ok"]
    assert resp["result"]["n_nodes"] == 6
    assert resp["result"]["window"] == 4
    assert resp["result"]["model_name"].startswith("toy-trained")


def test_too_short_series_rejected(tmp_path, instance):
    short = tmp_path / "short.csv"
    lines = (instance / "features.csv").read_text().splitlines()[:3]
    short.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        train_toy(
            TrainConfig(
                adjacency_path=str(instance / "adjacency.csv"),
                features_path=str(short),
                out_path=str(tmp_path / "x.pt"),
                window=4,
            )
        )
