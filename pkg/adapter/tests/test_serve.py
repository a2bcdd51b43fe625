import io
import json

import numpy as np

from tgx_adapter.cell import from_weights_document
from tgx_adapter.serve import answer, serve


def make_cell(instance):
    return from_weights_document(instance / "weights.json", instance / "adjacency.csv")


def test_handshake(instance):
    cell = make_cell(instance)
    resp, stop = answer(cell, '{"op": "handshake", "id": 0}')
    assert not stop
    assert resp == {
        "id": 0,
        "ok": True,
        "result": {
            "n_nodes": 6,
            "feature_dim": 1,
            "window": 4,
            "model_name": cell.model_name,
        },
    }


def test_garbage_then_valid(instance):
    cell = make_cell(instance)
    stdin = io.StringIO("}{ not json\n" + '{"op": "handshake", "id": 3}\n')
    stdout = io.StringIO()
    serve(cell, stdin, stdout)
    first, second = [json.loads(line) for line in stdout.getvalue().splitlines()]
    assert first["ok"] is False and first["error"]["code"] == "parse-error"
    assert second["ok"] is True and second["id"] == 3


def test_bad_payload_keeps_serving(instance):
    cell = make_cell(instance)
    resp, stop = answer(cell, '{"op": "predict", "id": 1, "x_last": {"shape": [1], "data": [0.0]}}')
    assert resp["ok"] is False and resp["error"]["code"] == "bad-request"
    assert not stop
    resp, _ = answer(cell, '{"op": "handshake", "id": 2}')
    assert resp["ok"] is True


def test_shutdown_clean_exit(instance):
    cell = make_cell(instance)
    stdin = io.StringIO('{"op": "shutdown", "id": 0}\n{"op": "handshake", "id": 1}\n')
    stdout = io.StringIO()
    assert serve(cell, stdin, stdout) == 0
    lines = stdout.getvalue().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0]) == {"id": 0, "ok": True, "result": {}}


def test_hidden_state_and_predict_round(instance):
    cell = make_cell(instance)
    x_seq = np.full((4, 6, 1), 0.5)
    req = {"op": "hidden_state", "id": 0, "x_seq": {"shape": [4, 6, 1], "data": x_seq.tolist()}}
    resp, _ = answer(cell, json.dumps(req))
    assert resp["ok"]
    h = resp["result"]["h"]
    assert h["shape"] == [6, cell.hidden_dim]
    req2 = {
        "op": "predict",
        "id": 1,
        "x_last": {"shape": [6, 1], "data": x_seq[-1].tolist()},
        "h": h,
    }
    resp2, _ = answer(cell, json.dumps(req2))
    assert resp2["ok"]
    assert resp2["result"]["y"]["shape"] == [6]
    # frozen-state contract: repeating the call reproduces the numbers
    resp3, _ = answer(cell, json.dumps(req2))
    assert resp3["result"]["y"]["data"] == resp2["result"]["y"]["data"]


def test_request_log(tmp_path, instance):
    cell = make_cell(instance)
    stdin = io.StringIO('{"op": "handshake", "id": 0}\n{"op": "shutdown", "id": 1}\n')
    stdout = io.StringIO()
    log = io.StringIO()
    serve(cell, stdin, stdout, log=log)
    logged = log.getvalue().splitlines()
    assert len(logged) == 4  # request/response pairs for both messages
