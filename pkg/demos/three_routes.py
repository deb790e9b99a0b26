"""
Residual polynomials three ways
===============================

A small design, one response, and the residual polynomial Q_k computed
from the fitted path, from the moments of the spectral measure, and from
the weighted subset average. The three columns should agree to roundoff.
"""

import numpy as np

from plskrylov import experiments as ex
from plskrylov import respoly as rp
from plskrylov.pls_core import pls_fit
from plskrylov.spectral import decompose, project

X, Y = ex.random_instance(6, seed=3)
d = decompose(X)
proj = project(d, Y)
print("eigenvalues:", np.round(d.eigenvalues, 3))
print("p_hat:      ", np.round(proj.p_hat, 3))

path = pls_fit(X, Y, d.rank, decomp=d)
measure = rp.build_measure(d, proj.p_hat)

for k in (1, 2, 3):
    fit = rp.residual_poly_from_fit(path, proj, k)
    mom = rp.residual_poly_moments(measure, k, exact=True, spectrum=d.eigenvalues)
    weights, van = rp.residual_values_vandermonde(d, proj.p_hat, k)
    print(f"\nk = {k}  (coefficients {np.round(fit.coefficients, 4)})")
    print("  lambda      fit          moments      subsets")
    for lam, a, b, c in zip(d.eigenvalues, fit.values_on_spectrum, mom.values_on_spectrum, van):
        print(f"  {lam:7.3f}  {a: .6e}  {b: .6e}  {c: .6e}")
    top = np.argsort(weights.weights)[::-1][:3]
    print("  heaviest subsets:", [(tuple(int(j) for j in weights.index_subsets[t]), round(float(weights.weights[t]), 4)) for t in top])

# at k = r the polynomial vanishes on the whole spectrum
print("\nQ_r on the spectrum:", rp.residual_poly_from_fit(path, proj, d.rank).values_on_spectrum)
