"""Solve both control problems at the mean parameter and plot the controls.

At xi = 0 the random coefficient reduces to its mean, so the SAA problem
has a single sample.  The affine-linear solution is bang-bang-off: every
cell ends up at -1, 0 or 1.

    python3 demos/nominal_solution.py [n] [outdir]
"""
import sys

import numpy as np

from saacontrol.study import StudyConfig, solve_nominal

n = int(sys.argv[1]) if len(sys.argv) > 1 else 32
out = sys.argv[2] if len(sys.argv) > 2 else "demo_out/nominal"

for kind in ("affine-linear", "bilinear"):
    cfg = StudyConfig(kind=kind, n=n, N_ref=256, N_grid=(2, 8, 32))
    problem, trace = solve_nominal(cfg, f"{out}/{kind}")
    u = trace.final_u
    print(f"{kind}: {trace.status} after {trace.iterations} gap evaluations")
    for k, (obj, gap) in enumerate(zip(trace.objectives, trace.gaps)):
        print(f"  {k:3d}  objective {obj:.10f}  gap {gap:.3e}")
    d = problem.data
    levels = np.array([d.lower, 0.0, d.upper])
    share = np.mean(np.min(np.abs(u[:, None] - levels), axis=1) <= 1e-6)
    print(f"  cells at lower/0/upper: {share:.1%}; control heatmap in {out}/{kind}/nominal_control.svg")
