"""Mean and variance of a first-iteration weight: exact, approximate, simulated.

The exact moments use the graph's real neighbours.  The approximation
replaces every neighbour's reliability by the crowd average, which gets
better as questions get more users.

    python3 demos/first_iteration.py
"""
import numpy as np

from crowdbp import (
    CrowdMoments, ReliabilitySpec, approx_first_moments, degree_regular_assignment,
    exact_first_moments, make_population, sample_answers,
)
from crowdbp.iteration import kos_sums

spec = ReliabilitySpec.from_phi_squared(0.75, 0.09)
reps = 4000
print(" r    user p    exact mean  approx mean  sim mean    exact var   approx var  sim var")
for r in (5, 20, 80):
    Q, s = 20, 10
    U = r * Q // s
    asg = degree_regular_assignment(Q, U, r, s, seed=r)
    pop = make_population(U, Q, spec, seed=r)
    crowd = CrowdMoments.from_population(pop)
    e = 0
    a, i = asg.edges()[e]
    exact = exact_first_moments(asg, pop, a, i)
    approx = approx_first_moments(pop.reliabilities[a], crowd, r, s)
    rng = np.random.default_rng(r)
    ans = sample_answers(asg, pop, rng, size=reps).values
    y1 = kos_sums(asg, ans, rng.normal(1, 1, (reps, asg.n_edges)))[:, e]
    print(f"{r:3d}  {pop.reliabilities[a]:7.3f}  {exact.mean:11.2f}  {approx.mean:11.2f}  "
          f"{y1.mean():9.2f}  {exact.variance:11.1f}  {approx.variance:11.1f}  {y1.var(ddof=1):8.1f}")
