"""
Clustered and gapped spectra
============================

Noise-free empirical risk along the path. With ten tight clusters the risk
collapses by step ten; with c large eigenvalues well above a band of small
ones most of the drop happens in the first c steps.
"""

import numpy as np

from plskrylov import experiments as ex

centers = tuple(float(c) for c in range(19, 9, -1))
cfg = ex.ExperimentConfig(spectrum=ex.SpectrumSpec("clusters", centers=centers, spread=0.01,
                                                   counts=(10,) * 10),
                          noise_levels=(0.0,), reps=1, k_range=tuple(range(1, 13)), seed=10)
risk = ex.run_risk_study(cfg).column("observed_mean")
print("ten clusters: risk by k")
for k, r in enumerate(risk, start=1):
    print(f"  k={k:2d}  {r:.3e}")

for c in (5, 10, 15):
    g = ex.ExperimentConfig(spectrum=ex.SpectrumSpec("gap", c=c), noise_levels=(0.0,), reps=1,
                            k_range=tuple(range(1, 31)), seed=100 + c)
    r = ex.run_risk_study(g).column("observed_mean")
    print(f"gap c={c:2d}: risk at k=c {r[c-1]:.3e}, at k=c+3 {r[c+2]:.3e}, at k=30 {r[-1]:.3e}")

# the subset check is skipped once the number of subsets passes the cap
rec = ex.run_residual_path(cfg, [0, 99])
print("\nresidual path at the extreme eigendirections (first 4 steps)")
for row in rec.rows[:4]:
    print(f"  k={row['k']}  Q(lambda_1)={row['Q_0']: .3e}  Q(lambda_r)={row['Q_99']: .3e}"
          f"  subset check={row['vandermonde_checked']}")
