"""Why parameter distance is the wrong ruler for policies.

Two pairs of Gaussians, each pair one unit apart in (mu, sigma):

    narrow: N(0, 0.3^2) vs N(1, 0.3^2)
    wide:   N(0, 3^2)   vs N(1, 3^2)

A gradient step of fixed Euclidean length moves the narrow policy a hundred
times further, measured by KL divergence, than the wide one. The sweep at
the end shows how that factor grows like 1/sigma^2.

Run:  python demos/01_euclidean_vs_kl.py
"""

import numpy as np

from natgrad import distributions as dist
from natgrad.natural_gradient import euclidean_vs_kl_diagnostic

family = dist.gaussian_family()

print("pair                     euclidean   KL(a||b)   KL(b||a)")
for a, b in [((0, 0.3), (1, 0.3)), ((0, 3.0), (1, 3.0))]:
    r = euclidean_vs_kl_diagnostic(family, dist.params(a), dist.params(b))
    print(f"{a} -> {b}   {r.euclidean:9.6f}  {r.kl_ab:9.5f}  {r.kl_ba:9.5f}")

print("\nKL of a unit mean shift as the policy narrows:")
for sigma in np.geomspace(3.0, 0.03, 5):
    kl = dist.kl_closed_form(family, dist.params([0, sigma]), dist.params([1, sigma]))
    print(f"  sigma={sigma:7.3f}  KL={kl:12.4f}  (1/(2 sigma^2) = {1 / (2 * sigma**2):12.4f})")
