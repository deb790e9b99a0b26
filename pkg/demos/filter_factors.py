"""
Filter factors and shrinkage
============================

PLS is a spectral filter: beta_k = sum_i f_i^k p_hat_i / sqrt(lambda_i) v_i.
The factor on the largest eigenvalue alternates around one, the factor on
the smallest stays in (0, 1), and the norm of beta_k grows towards OLS.
"""

import numpy as np

from plskrylov import experiments as ex
from plskrylov.pls_core import filter_factors, ols_fit, pls_fit
from plskrylov.spectral import decompose, project

X, Y = ex.random_instance(8, seed=11)
d = decompose(X)
path = pls_fit(X, Y, d.rank, decomp=d)
f = filter_factors(path, project(d, Y), d)

print(" k   f_1^k     f_r^k     ||beta_k||")
for k in range(1, path.k_max + 1):
    print(f"{k:2d}  {f[k-1, 0]:8.4f}  {f[k-1, -1]:8.4f}  {np.linalg.norm(path.betas[k-1]):9.5f}")
print(f"OLS norm: {np.linalg.norm(ols_fit(X, Y, decomp=d).beta_ols):.5f}")

# with matplotlib available, plot the whole factor matrix
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    fig, ax = plt.subplots()
    for i in range(d.rank):
        ax.plot(range(1, path.k_max + 1), f[:, i], marker=".", label=f"lambda={d.eigenvalues[i]:.2f}")
    ax.axhline(1.0, color="k", lw=0.5)
    ax.set_xlabel("k")
    ax.set_ylabel("filter factor")
    ax.legend(fontsize="small")
    fig.savefig("filter_factors.png")
    print("saved filter_factors.png")
