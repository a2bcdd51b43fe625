"""Conformance against the explainer's adapter-check command.

This is the acceptance gate for the adapter: the explainer drives this
package as a child process through the wire protocol and compares it
against its embedded model on shared weights.
"""

import json
import shlex
import subprocess
import sys


def test_criterion_10_adapter_check_passes(instance):
    adapter_cmd = " ".join(
        shlex.quote(part)
        for part in (
            sys.executable, "-m", "tgx_adapter.cli", "serve",
            "--weights", str(instance / "weights.json"),
            "--adjacency", str(instance / "adjacency.csv"),
        )
    )
    proc = subprocess.run(
        [
            sys.executable, "-m", "tgxplain.cli", "adapter-check",
            "--adapter-cmd", adapter_cmd,
            "--weights", str(instance / "weights.json"),
            "--adjacency", str(instance / "adjacency.csv"),
            "--features", str(instance / "features.csv"),
            "--tol", "1e-5",
        ],
        capture_output=True,
        text=True,
    )
    try:
        assert proc.returncode == 0, proc.stderr
        assert "adapter conformance: PASS" in proc.stdout
        report = json.loads(proc.stdout[: proc.stdout.rindex("}") + 1])
        assert report["max_prediction_error"] <= 1e-5
        assert report["max_hidden_error"] <= 1e-5
    except AssertionError:
        print("criterion 10 FAIL: adapter conformance against the explainer")
        raise
    print("criterion 10 PASS: adapter conformance against the explainer")


def test_explain_pipeline_identical_through_adapter(instance, tmp_path):
    """Full pipeline over the wire reproduces the embedded run byte for byte."""
    adapter_cmd = " ".join(
        shlex.quote(part)
        for part in (
            sys.executable, "-m", "tgx_adapter.cli", "serve",
            "--weights", str(instance / "weights.json"),
            "--adjacency", str(instance / "adjacency.csv"),
        )
    )
    common = [
        sys.executable, "-m", "tgxplain.cli", "explain",
        "--adjacency", str(instance / "adjacency.csv"),
        "--features", str(instance / "features.csv"),
        "--interval", "2", "8",
        "--target", "0",
        "--num-samples", "80",
        "--change-threshold", "0.001",
        "--auto-threshold", "0.6",
    ]
    runs = {}
    for name, extra in (
        ("embedded", ["--weights", str(instance / "weights.json")]),
        ("adapter", ["--adapter-cmd", adapter_cmd]),
    ):
        out = tmp_path / name
        proc = subprocess.run(
            common + extra + ["--out", str(out)], capture_output=True, text=True
        )
        assert proc.returncode == 0, proc.stderr
        runs[name] = json.loads((out / "dominant.json").read_text())
    assert runs["embedded"]["records"] == runs["adapter"]["records"]
    assert (
        runs["embedded"]["instrumentation"] == runs["adapter"]["instrumentation"]
    )


def test_rejected_when_weights_differ(instance, tmp_path):
    # perturb one weight: the numeric comparison must fail, exit code 1
    doc = json.loads((instance / "weights.json").read_text())
    doc["arrays"]["w_o"]["data"][0] += 0.25
    skewed = tmp_path / "skewed.json"
    skewed.write_text(json.dumps(doc))
    adapter_cmd = " ".join(
        shlex.quote(part)
        for part in (
            sys.executable, "-m", "tgx_adapter.cli", "serve",
            "--weights", str(skewed),
            "--adjacency", str(instance / "adjacency.csv"),
        )
    )
    proc = subprocess.run(
        [
            sys.executable, "-m", "tgxplain.cli", "adapter-check",
            "--adapter-cmd", adapter_cmd,
            "--weights", str(instance / "weights.json"),
            "--adjacency", str(instance / "adjacency.csv"),
            "--features", str(instance / "features.csv"),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 1
    assert "FAIL" in proc.stderr
