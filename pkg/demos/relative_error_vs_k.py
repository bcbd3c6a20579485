"""How the spread of the raw weights evolves with the iteration count.

For each crowd we fix one graph and one population, rerun the raw update
from fresh answers and fresh starting weights, and follow the relative
error sqrt(var)/|mean| of one typical edge.  The unreliable crowd sits below
the convergence threshold 1/((s-1)(r-1)); the other two sit above it.

    python3 demos/relative_error_vs_k.py [replications]
"""
import sys

import numpy as np

from crowdbp.harness import preset, run_experiment

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 50

for name in ("relerr_unreliable", "relerr_reliable_low", "relerr_reliable_high"):
    res = run_experiment(preset(name, replications=reps))
    print(f"\n== {name}")
    for note in res.notes[:3]:
        print("  " + note)
    rel = res.data["typical_rel"]
    print("  k   rel_err (typical edge)   median over edges")
    med = np.nanmedian(res.data["rel"], axis=1)
    for k, (a, b) in enumerate(zip(rel, med), start=1):
        print(f"  {k:2d}  {a:10.4f}             {b:10.4f}")
    for c in res.checks:
        print("  " + c.line())

# The same reliable crowd with the answers held fixed: only the starting
# weights vary, and the spread now dies out.
res = run_experiment(preset("relerr_reliable_low", replications=reps, resample_answers=False))
print("\n== relerr_reliable_low, answers fixed across replications")
print("  rel_err by k: " + " ".join(f"{v:.3f}" for v in res.data["typical_rel"]))
