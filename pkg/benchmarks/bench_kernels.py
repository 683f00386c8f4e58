"""Compare the compiled and numpy backends on objective evaluations.

Each backend runs in its own interpreter (the backend is chosen at import)::

    python3 benchmarks/bench_kernels.py [--R 1000] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
from mixpose.kernels import BACKEND
from mixpose.objective import objective
from mixpose.simharness import SCENARIOS, make_system, sample_true_pose, study_samples, synthesize
R, repeat = int(sys.argv[1]), int(sys.argv[2])
out = {"backend": BACKEND}
truth = sample_true_pose(0)
for number in (2, 3):
    problem = synthesize(make_system(number), SCENARIOS["I"], truth)
    samples = study_samples(problem, R, 0)
    objective(problem, truth, samples)
    t = timeit.Timer(lambda: objective(problem, truth, samples))
    n, _ = t.autorange()
    out[f"system{number}"] = min(t.repeat(repeat, n)) / n
print(json.dumps(out))
"""


def run_backend(pure: bool, R: int, repeat: int) -> dict:
    env = dict(os.environ, MIXPOSE_PURE="1" if pure else "0")
    proc = subprocess.run([sys.executable, "-c", WORKER, str(R), str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--R", type=int, default=1000, help="samples per feature")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = run_backend(False, args.R, args.repeat), run_backend(True, args.R, args.repeat)
    if fast["backend"] != "cython":
        print("compiled extension not built; only the numpy backend is available", file=sys.stderr)
    print(f"objective evaluation, 6 features x R={args.R} samples (best of {args.repeat})")
    print(f"{'setup':<22}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key, label in (("system2", "two cameras"), ("system3", "three lateration")):
        a, b = fast[key], slow[key]
        print(f"{label:<22}{a * 1e3:>10.3f}ms{b * 1e3:>10.3f}ms{b / a:>9.2f}x")


if __name__ == "__main__":
    main()
