#!/usr/bin/env python3
"""Benchmark the hot DP kernels: numba backend vs the pure-numpy fallback.

The backend binds at import time from CONDCTC_BACKEND, so each backend runs
in its own subprocess and reports timings back as JSON.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

CASES = [
    # (name, frames, extended vocab size, target length)
    ("pipeline-scale", 30, 7, 7),
    ("long-utterance", 200, 30, 40),
]


def run_worker(repeats: int) -> dict:
    import numpy as np

    from condctc import _backend, _kernels
    from condctc.ctc import extended_target

    rng = np.random.default_rng(0)
    results: dict = {"backend": _backend.BACKEND, "cases": {}}
    for name, t, k, l in CASES:
        probs = rng.uniform(0.05, 1.0, size=(t, k))
        probs /= probs.sum(axis=1, keepdims=True)
        logp = np.log(probs)
        target = tuple(int(v) for v in rng.integers(1, k, size=l))
        ext = extended_target(target)

        timings = {}
        for label, fn in (
            ("ctc_loss_grad", lambda: _kernels.loss_grad_coeff(logp, ext)),
            ("viterbi_align", lambda: _kernels.viterbi_states(logp, ext)),
            ("ctc_forward", lambda: _kernels.forward_log_prob(logp, ext)),
        ):
            fn()  # warm-up (numba compiles here)
            best = float("inf")
            for _ in range(repeats):
                start = time.perf_counter()
                for _ in range(20):
                    fn()
                best = min(best, (time.perf_counter() - start) / 20)
            timings[label] = best
        results["cases"][name] = timings
    return results


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        print(json.dumps(run_worker(args.repeats)))
        return 0

    reports = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, CONDCTC_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, __file__, "--worker", "--repeats", str(args.repeats)],
            env=env,
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            print(proc.stderr, file=sys.stderr)
            return 1
        reports[backend] = json.loads(proc.stdout)

    print(f"{'case':<16}{'kernel':<16}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    print("-" * 66)
    for name, _, _, _ in CASES:
        for kernel in ("ctc_loss_grad", "viterbi_align", "ctc_forward"):
            fast = reports["numba"]["cases"][name][kernel]
            slow = reports["numpy"]["cases"][name][kernel]
            print(
                f"{name:<16}{kernel:<16}{fast * 1e6:>10.1f}us{slow * 1e6:>10.1f}us"
                f"{slow / fast:>9.1f}x"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
