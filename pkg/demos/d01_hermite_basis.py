"""
Hermite bases and chaos weights
===============================

Builds the orthogonal bases behind the chaos expansion and checks them
numerically. Run with ``python3 demos/d01_hermite_basis.py``.
"""
import math

import numpy as np

from kpde.hermite import eval_fourier_hermite, hermite_functions, hermite_poly, sample_matrix
from kpde.multi_index import TruncationSet, weight_partial_sum

# probabilists' Hermite polynomials are orthogonal under the Gaussian law,
# with E[h_n^2] = n!
z = np.random.default_rng(0).standard_normal(200_000)
for n in range(4):
    print(f"E[h_{n}^2] ~ {np.mean(hermite_poly(n, z) ** 2):7.3f}   n! = {math.factorial(n)}")

# Hermite functions are orthonormal in L2(R)
t = np.linspace(-20, 20, 8001)
xi = hermite_functions(5, t)
gram = xi @ xi.T * (t[1] - t[0])
print("max |Gram - I| for xi_1..xi_6:", np.max(np.abs(gram - np.eye(len(gram)))))

# the truncation set of total degree <= P in K Gaussian coordinates
trunc = TruncationSet(2, 3)
print("P=2, K=3 multi-indices:", [g.dense(3) for g in trunc])

# Fourier-Hermite polynomials evaluated on samples have covariance diag(gamma!)
Z = sample_matrix(3, 50_000, seed=1)
H = np.stack([eval_fourier_hermite(g, Z) for g in trunc], axis=1)
C = H.T @ H / len(H)
norms = np.array([math.prod(math.factorial(v) for v in g.dense(3)) for g in trunc])
print("max |E[H_a H_b] - a! delta_ab| (sampling error):", np.max(np.abs(C - np.diag(norms))))

# the weighted sum of (2N)^{-p gamma} settles for p > 1 and keeps growing at p = 1
for p in (1.0, 1.1, 2.0):
    sums = [weight_partial_sum(p, TruncationSet(k, k)) for k in (4, 8, 12, 16)]
    print(f"p = {p}: " + "  ".join(f"{s:.4f}" for s in sums))
