import subprocess
import sys

import pytest


@pytest.fixture(scope="session")
def instance(tmp_path_factory):
    """Synthetic instance files produced by the explainer CLI."""
    out = tmp_path_factory.mktemp("instance")
    proc = subprocess.run(
        [
            sys.executable, "-m", "tgxplain.cli", "synth",
            "--out", str(out), "--seed", "1", "--n-nodes", "6",
            "--t-total", "20", "--active-start", "4", "--active-end", "9",
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return out
