"""
Kronecker graphs: generation and closed-form laws
=================================================

Deterministic Kronecker powers obey exact counting laws.  Stochastic
ones reproduce the same trends in expectation.  This script prints both
side by side and then looks at how densification and the effective
diameter evolve as the power grows.

Run with ``python3 demos/01_generation_and_laws.py`` (about a minute).
"""
import math

import numpy as np

from krongraph.core import (
    InitiatorMatrix,
    KroneckerPowerSpec,
    generate_deterministic,
    generate_fast,
    initiator_from_binary,
)
from krongraph.graph import weakly_connected_components
from krongraph.stats import densification_exponent, effective_diameter, integer_diameter

# A three-node star with self-loops has diameter 2.  Every power keeps
# that diameter, N_k = 3^k nodes and E_k = 7^k edges.
star = InitiatorMatrix([[1, 1, 1], [1, 1, 0], [1, 0, 1]])
print("deterministic star powers")
print(" k     nodes    edges  diameter  eff.diam")
snaps = []
for k in range(1, 8):
    g = generate_deterministic(star, k)
    snaps.append((g.n, g.e))
    print(f"{k:2d} {g.n:9d} {g.e:8d} {integer_diameter(g):9d} {effective_diameter(g):9.4f}")
print(f"densification exponent {densification_exponent(snaps):.6f}"
      f" = log 7 / log 3 = {math.log(7) / math.log(3):.6f}")

# Two connected bipartite graphs multiply into exactly two components.
edge = np.array([[0, 1], [1, 0]])
path = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
prod = generate_deterministic(InitiatorMatrix(np.kron(edge, path)), 1)
print("\nbipartite x bipartite components:", weakly_connected_components(prod).count)

# %%
# Stochastic powers
# -----------------
# Replacing ones by alpha and zeros by beta turns a binary initiator into
# a probability matrix.  The fast generator places about (sum theta)^k
# edges by recursive descent.
theta = np.array([[0.9, 0.6], [0.5, 0.1]])
spec = KroneckerPowerSpec(InitiatorMatrix(theta), 14)
g = generate_fast(spec, seed=0)
print(f"\nstochastic k=14: n={g.n} e={g.e} expected={spec.expected_edges:.0f} "
      f"sd={math.sqrt(spec.edge_count_variance()):.0f}")

# %%
# Densification and shrinking diameters
# -------------------------------------
# A 4-node chain with self-loops, alpha = 0.43 and beta = 0, densifies with
# exponent log 4.3 / log 4, about 1.05.  With alpha = 0.54 the effective
# diameter stays nearly flat, gaining less than one hop while the node
# count grows 4,000-fold.  Hop counts come from 1,000 sampled BFS sources.
chain = np.eye(4) + np.eye(4, k=1) + np.eye(4, k=-1)
sparse_chain = initiator_from_binary(chain, 0.43, 0.0)
snaps = [(h.n, h.e) for h in (generate_fast(sparse_chain, seed=1, k=k) for k in range(2, 11))]
print(f"\nchain alpha=0.43: densification exponent {densification_exponent(snaps):.3f}")

dense_chain = initiator_from_binary(chain, 0.54, 0.0)
print("chain alpha=0.54: effective diameter by k")
for k in range(2, 9):
    h = generate_fast(dense_chain, seed=2, k=k)
    wcc = weakly_connected_components(h)
    print(f"  k={k:2d} n={h.n:8d} e={h.e:8d} largest wcc={wcc.largest / h.n:5.1%} "
          f"eff.diam={effective_diameter(h, undirected=True, sample_sources=1000, seed=0):6.2f}")
