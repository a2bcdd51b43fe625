"""Request loop: line-delimited JSON on stdin/stdout (see docs/protocol.md
in the explainer repository for the grammar this implements).

Malformed input gets an error response and the loop keeps serving; a
shutdown request is acknowledged and the process exits 0.
"""

from __future__ import annotations

import json

import numpy as np
import torch

from .cell import GraphGRU


def _wire(a) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.tolist()}


def _unwire(obj) -> torch.Tensor:
    value = np.array(obj["data"], dtype=np.float64)
    if list(value.shape) != list(obj["shape"]):
        raise ValueError(f"declared shape {obj['shape']} != data shape {list(value.shape)}")
    return torch.as_tensor(value)


def _error(msg_id, code, message):
    return {"id": msg_id, "ok": False, "error": {"code": code, "message": message}}


def answer(cell: GraphGRU, line: str):
    """(response dict, stop flag) for one request line."""
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        return _error(None, "parse-error", str(exc)), False
    if not isinstance(msg, dict):
        return _error(None, "parse-error", "request must be a JSON object"), False
    msg_id = msg.get("id")
    op = msg.get("op")
    try:
        with torch.no_grad():
            if op == "handshake":
                result = {
                    "n_nodes": cell.n_nodes,
                    "feature_dim": cell.feature_dim,
                    "window": cell.window,
                    "model_name": cell.model_name,
                }
            elif op == "hidden_state":
                x_seq = _unwire(msg["x_seq"])
                result = {"h": _wire(cell.hidden_state(x_seq).numpy())}
            elif op == "predict":
                x_last = _unwire(msg["x_last"])
                h = _unwire(msg["h"])
                result = {"y": _wire(cell.predict_with_hidden(x_last, h).numpy())}
            elif op == "shutdown":
                return {"id": msg_id, "ok": True, "result": {}}, True
            else:
                return _error(msg_id, "bad-op", f"unknown op {op!r}"), False
    except (KeyError, ValueError, RuntimeError) as exc:
        return _error(msg_id, "bad-request", str(exc)), False
    return {"id": msg_id, "ok": True, "result": result}, False


def serve(cell: GraphGRU, stdin, stdout, log=None) -> int:
    for line in stdin:
        if not line.strip():
            continue
        response, stop = answer(cell, line)
        stdout.write(json.dumps(response, separators=(",", ":")) + "\n")
        stdout.flush()
        if log is not None:
            log.write(line.rstrip("\n") + "\n")
            log.write(json.dumps(response, separators=(",", ":")) + "\n")
            log.flush()
        if stop:
            return 0
    return 0
