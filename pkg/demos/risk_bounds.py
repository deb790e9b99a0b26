"""
Risk and the Chebyshev envelope
===============================

Monte Carlo empirical risk for a two-cluster design against two upper
bounds: rho^{2k} (signal + sigma^2), and the same with rho^k replaced by the
exact minimax value 2 rho^k / (1 + rho^{2k}) of a degree-k polynomial with
P(0) = 1 on [lambda_r, lambda_1]. Only the second holds for every k.
"""

import numpy as np

from plskrylov import bounds as bd
from plskrylov import experiments as ex

for C in (1.5, 4.0, 100.0):
    m = [bd.minimax_envelope(1.0, C, k).minimax_value for k in (1, 2, 4)]
    rho = [bd.chem_factor(C, k) for k in (1, 2, 4)]
    print(f"C={C:6.1f}  minimax {np.round(m, 5)}  rho^k {np.round(rho, 5)}")

n = 30
lam = tuple(np.linspace(1.5 * n, n, n) / 1.25)
cfg = ex.ExperimentConfig(n=n, p=n, spectrum=ex.SpectrumSpec("explicit", values=lam),
                          noise_levels=(0.1, 1.0), reps=200, k_range=(1, 2, 3, 4), seed=5)
risk = ex.run_risk_study(cfg)
table = ex.run_bound_table(cfg)
print("\nsigma  k   observed      rho form      minimax form")
for row, b in zip(risk.rows, table.rows):
    flag = "  <- above rho form" if row["observed_mean"] > row["bound"] + 3 * row["observed_se"] else ""
    print(f"{row['sigma']:4.1f}  {row['k']}  {row['observed_mean']:.4e}  {row['bound']:.4e}"
          f"  {b['bound_minimax']:.4e}{flag}")
