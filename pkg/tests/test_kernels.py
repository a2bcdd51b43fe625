import math

import numpy as np
import pytest

from tgxplain import _scorekit_py
from tgxplain import kernels


def random_codes(seed, s=500, m=6):
    return np.random.default_rng(seed).integers(0, 3, size=(s, m)).astype(np.uint8)


def test_backend_identifier():
    assert kernels.BACKEND in ("compiled", "python")
    assert _scorekit_py.BACKEND == "python"


@pytest.mark.parametrize("seed", range(5))
def test_backends_agree_exactly(seed):
    codes = random_codes(seed)
    for child, parents in ((0, []), (2, [0]), (4, [1, 3]), (5, [0, 2, 4])):
        a = kernels.family_counts(codes, child, parents, 3)
        b = _scorekit_py.family_counts(codes, child, parents, 3)
        assert np.array_equal(a, b)
        la = kernels.loglik_from_counts(a)
        lb = _scorekit_py.loglik_from_counts(b)
        assert la == lb
        assert kernels.family_loglik(codes, child, parents, 3) == la


def test_mixed_radix_order_hand_case():
    # two parents: first parent is the most significant digit
    codes = np.array([[1, 2, 0]], dtype=np.uint8)
    counts = _scorekit_py.family_counts(codes, 0, [1, 2], 3)
    assert counts[2 * 3 + 0, 1] == 1
    assert counts.sum() == 1


def test_loglik_hand_value():
    counts = np.array([[2, 2, 0]], dtype=np.int64)
    expect = 4 * math.log(0.5)
    assert abs(_scorekit_py.loglik_from_counts(counts) - expect) < 1e-12
    assert abs(kernels.loglik_from_counts(counts) - expect) < 1e-12


def test_readonly_input_accepted():
    codes = random_codes(9)
    codes.flags.writeable = False
    counts = kernels.family_counts(codes, 0, [1], 3)
    assert counts.sum() == codes.shape[0]


def test_force_python_env():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "import tgxplain.kernels as k; print(k.BACKEND)"],
        env={"PATH": "/usr/bin:/bin", "TGXPLAIN_FORCE_PYTHON": "1"},
        capture_output=True,
        text=True,
    )
    assert out.stdout.strip() == "python"
