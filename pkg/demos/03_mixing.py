"""
Mixing of the permutation chain
===============================

The chain mixes two proposals: swapping two random nodes (chosen with
probability omega) and swapping the endpoints of a random edge.  Four
chains run at the generating initiator.  One starts from the generating
permutation and three from random ones.  The scale reduction drops
below 1.2 once the random chains have caught up, which is fastest for
intermediate omega.

Run with ``python3 demos/03_mixing.py`` (about a minute).
"""
import numpy as np

from krongraph.core import generate_fast
from krongraph.diagnostics import run_chains

theta = np.array([[0.9, 0.7], [0.6, 0.5]])
k = 10
g = generate_fast(theta, seed=1002, k=k)
starts = [np.arange(g.n), None, None, None]

print("omega  converged at   acceptance  lag-100 autocorrelation")
for omega in (0.0, 0.3, 0.6, 1.0):
    run = run_chains(g, theta, k, n_chains=4, n_steps=400_000, omega=omega, seed=3,
                     record_every=100, starts=starts)
    d = run.diagnostics(max_lag=1000, points=40)
    at = d.converged_at()
    print(f"{omega:5.1f}  {str(at) if at else 'not yet':>12}   {d.acceptance:10.3f}"
          f"  {d.autocorrelation[1]:10.3f}")
