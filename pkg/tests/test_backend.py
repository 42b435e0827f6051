"""The pure-numpy kernel fallback must agree with the jitted path.

The backend is chosen at import time from CONDCTC_BACKEND, so the fallback
runs in a subprocess and reports its results for comparison here.
"""

import json
import os
import subprocess
import sys

import numpy as np

from condctc import _backend, _kernels
from condctc.ctc import extended_target

_PROBE = r"""
import json
import numpy as np
from condctc import _backend, _kernels
from condctc.ctc import extended_target

assert _backend.BACKEND == "numpy", _backend.BACKEND
rng = np.random.default_rng(123)
out = []
for _ in range(12):
    t = int(rng.integers(1, 7))
    k = int(rng.integers(2, 5))
    probs = rng.uniform(0.05, 1.0, size=(t, k))
    probs /= probs.sum(axis=1, keepdims=True)
    target = tuple(int(v) for v in rng.integers(1, k, size=rng.integers(0, 3)))
    logp = np.log(probs)
    ext = extended_target(target)
    fwd = float(_kernels.forward_log_prob(logp, ext))
    log_p, coeff = _kernels.loss_grad_coeff(logp, ext)
    score, states = _kernels.viterbi_states(logp, ext)
    out.append(
        {
            "forward": fwd,
            "log_p": float(log_p),
            "coeff": coeff.tolist(),
            "score": float(score),
            "states": states.tolist(),
        }
    )
print(json.dumps(out))
"""


def test_numpy_fallback_matches_numba():
    assert _backend.BACKEND == "numba", "suite expects the jitted default"
    env = dict(os.environ, CONDCTC_BACKEND="numpy")
    proc = subprocess.run(
        [sys.executable, "-c", _PROBE], env=env, capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    fallback = json.loads(proc.stdout)

    rng = np.random.default_rng(123)
    for entry in fallback:
        t = int(rng.integers(1, 7))
        k = int(rng.integers(2, 5))
        probs = rng.uniform(0.05, 1.0, size=(t, k))
        probs /= probs.sum(axis=1, keepdims=True)
        target = tuple(int(v) for v in rng.integers(1, k, size=rng.integers(0, 3)))
        logp = np.log(probs)
        ext = extended_target(target)
        assert float(_kernels.forward_log_prob(logp, ext)) == pytest_approx(
            entry["forward"]
        )
        log_p, coeff = _kernels.loss_grad_coeff(logp, ext)
        assert float(log_p) == pytest_approx(entry["log_p"])
        np.testing.assert_allclose(coeff, np.asarray(entry["coeff"]), atol=1e-12)
        score, states = _kernels.viterbi_states(logp, ext)
        assert float(score) == pytest_approx(entry["score"])
        assert states.tolist() == entry["states"]


def pytest_approx(value, tol=1e-12):
    import pytest

    if value == float("-inf"):
        return value
    return pytest.approx(value, abs=tol)
