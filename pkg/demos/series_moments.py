"""A crowd answering a series of meta-tasks.

Every meta-task is a fresh graph and fresh answers; each user's mean weight
is carried into the next one and updated once.  We compare the simulated
per-user means with the geometric prediction, the variance with its closed
form, and the final decisions with the rule that weights each answer by
2p - 1.

    python3 demos/series_moments.py [replications]
"""
import sys

import numpy as np

from crowdbp.harness import preset, run_experiment

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 200

for name in ("series_unreliable", "series_reliable_low", "series_reliable_high"):
    res = run_experiment(preset(name, replications=reps))
    d = res.data
    p = d["population"].reliabilities
    a = int(np.argsort(p)[len(p) // 2])
    print(f"\n== {name}")
    for note in res.notes[:3]:
        print("  " + note)
    print(f"  median user {a} (p={p[a]:.3f})")
    print("  k   sim mean     predicted    sim var       closed form   agreement")
    for k in range(len(d["bound"])):
        print(f"  {k + 1}  {d['emp_mean'][k, a]: .4e}  {d['pred_mean'][k, a]: .4e}  "
              f"{d['emp_var'][k, a]: .4e}  {d['bound'][k]: .4e}  {d['agreement'][:, k].mean():.3f}")
    for c in res.checks:
        print("  " + c.line())
