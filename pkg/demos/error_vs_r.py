"""Percentage of questions decided wrongly as each question gets more users.

s is fixed at 10, |Q| at 100 and |U| grows with r.  Weights are normalized
and iterated until they stop moving; plain majority voting is shown for
comparison.

    python3 demos/error_vs_r.py [replications]
"""
import sys

from crowdbp.harness import preset, run_experiment

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 50

for name in ("rsweep_reliable_low", "rsweep_reliable_high"):
    res = run_experiment(preset(name, replications=reps))
    t = res.tables["error_vs_r"]
    print(f"\n== {name}  ({res.notes[-1]})")
    print("   r   |U|   error %   (+-se)   majority %   iterations")
    for r, u, e, se, it, maj in t.rows:
        print(f"  {r:2d}  {u:4d}  {e:7.2f}  {se:7.2f}   {maj:8.2f}     {it:6.1f}")
    for c in res.checks:
        print("  " + c.line())
