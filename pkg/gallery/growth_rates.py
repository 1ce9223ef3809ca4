# Growth rates of a weighted Apollonian-type complex.
#
# Faces carry the sum of their vertex weights as fitness; new vertices have
# weight 1 with probability beta and alpha otherwise. The urn reduction turns
# the long-run total fitness per step into the Perron root of a 4x4 matrix.

import numpy as np

from simplicial_percolation import build_complex, build_main_urn, dominant_eigenpair, lambda_star, two_point_config

alpha = 0.5
print(f"alpha = {alpha}")
print(" beta   lambda   lambda*  ratio")
for beta in np.linspace(0.1, 0.9, 5):
    cfg = two_point_config(alpha, beta)
    lam = dominant_eigenpair(build_main_urn(cfg)).lam
    star = lambda_star(cfg)
    print(f" {beta:.1f}   {lam:.4f}   {star.lambda_star:.4f}   {star.lambda_star / lam:.4f}")

# The ratio stays above 1/2, so with r = 2 the threshold n^(-lambda*/lambda)
# sits in the regime where the subcritical side is sharp.

# Now check the limit against one simulated complex.
cfg = two_point_config(alpha, 0.5)
res = dominant_eigenpair(build_main_urn(cfg))
cx = build_complex(cfg, 200_000, np.random.default_rng(1))
print()
print("Z/n simulated:", cx.total_fitness / cx.step_count)
print("Z/n limit    :", res.lam)

# Type frequencies of the active faces approach the normalised profile.
counts = np.bincount(cx.face_types[cx.alive], minlength=cfg.q)
for t, emp, lim in zip(cfg.face_types, counts / counts.sum(), res.type_distribution):
    print(f"  {t.weights}: {emp:.4f} vs {lim:.4f}")
