"""The Fisher matrix is the curvature of KL divergence at zero displacement.

For each family we compare three matrices at one parameter point:

    analytic   closed-form Fisher
    fd-hessian central finite differences of d -> KL(pi_theta || pi_theta+d)
    sampled    mean outer product of score vectors

The first two agree to finite-difference precision. The sampled estimate
converges at the usual 1/sqrt(N) rate, which is what makes it usable when
no closed form exists.

Run:  python demos/02_fisher_is_kl_curvature.py
"""

import numpy as np

from natgrad import distributions as dist
from natgrad import information_geometry as ig
from natgrad.experiment import fisher_relative_error

np.set_printoptions(precision=6, suppress=True)

cases = [
    ("gaussian (mu, sigma)", dist.gaussian_family(), dist.params([0.5, 0.7])),
    ("gaussian (mu, log sigma)", dist.gaussian_family(dist.LOG_SCALE),
     dist.params([0.5, np.log(0.7)], dist.LOG_SCALE)),
    ("categorical k=3", dist.categorical_family(3), dist.params([0.2, -0.4, 1.0])),
]
for name, family, theta in cases:
    f = dist.fisher_analytic(family, theta).matrix
    h = ig.kl_hessian_fd(family, theta).matrix
    print(f"{name}\n  analytic:\n{f}\n  max |F - H_fd| = {np.max(np.abs(f - h)):.2e}\n")

family, theta = dist.gaussian_family(), dist.params([0.0, 1.0])
exact = dist.fisher_matrix(family, theta)
print("sampled Fisher at N(0, 1), exact diag(1, 2):")
rng = np.random.default_rng(0)
for n in (100, 1_000, 10_000, 100_000, 1_000_000):
    xs = dist.sample_batch(family, theta, n, rng)
    est = ig.fisher_from_samples(dist.score_batch(family, theta, xs)).matrix
    err = fisher_relative_error(est, exact)
    print(f"  N={n:>9,d}  relative error {err:.4f}   err*sqrt(N) = {err * np.sqrt(n):.2f}")
