# Bootstrap percolation on a grown complex, swept across the critical scale.
#
# A healthy vertex is infected once two of its neighbours are infected
# (r=2, k=1). Starting from an i.i.d. seed of density p, does everything end
# up infected?

from simplicial_percolation import critical_probability, ran_config
from simplicial_percolation.experiments import ExperimentPlan, sweep_percolation

cfg = ran_config(4, r=2, k=1)
n = 20_000
pc = critical_probability(n, cfg)
print(f"p_c = n^{pc.exponent:.3f} = {pc.p_c:.2e}  ({pc.regime})")

plan = ExperimentPlan(cfg, n, replicas=40, diagnostics=frozenset({"sweep"}), master_seed=11, p_grid_points=5)
for row in sweep_percolation(plan).detail:
    print(f"p/p_c = {row.p / pc.p_c:7.2f}   percolated {row.fraction_percolated:.2f} +- {row.half_width:.2f}"
          f"   no change after round one {row.fraction_stable_at_one:.2f}")
