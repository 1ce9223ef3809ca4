# How fast does the degree of a fixed vertex grow?
#
# For the random Apollonian network in dimension d the star of a vertex grows
# at rate (d-2) while the whole complex grows at rate (d-1), so the degree of
# vertex i at time n behaves like (n/i)^((d-2)/(d-1)).

import numpy as np

from simplicial_percolation import ran_config
from simplicial_percolation.experiments import ExperimentPlan, check_degree_growth

for d in (3, 4):
    plan = ExperimentPlan(ran_config(d), n=100_000, replicas=20, diagnostics=frozenset(), master_seed=3)
    res = check_degree_growth(plan).detail
    print(f"d={d}: slope {res.slope:.3f}, limit {res.target:.3f}")
    for c, x, y in zip(res.checkpoints, res.mean_log_ratio, res.log_mean_degree):
        print(f"   n={c:>7}  log(n/i)={x:.2f}  log E[deg]={y:.2f}")

# For d=3 the expected degree is an exact power law and the fit lands on 1/2.
# For d>3 the degree starts at d rather than on the power-law curve, so at
# these sizes the fitted slope sits below its limit.
