"""
Glauber dynamics against exact enumeration
==========================================

On a handful of spins the Boltzmann distribution can be written down by
listing all 2^N states. A long Glauber chain should visit them with the
same frequencies.
"""

import numpy as np

from kbi.kernel_graph import Graph, KernelParams
from kbi.spin_model import FieldParams, ModelParams, exact_boltzmann, glauber_chain
from kbi.blau_space import DimSchema, Population, Site

rng = np.random.default_rng(1)
N = 8
pop = Population(tuple(Site(str(i), (float(z),), 1) for i, z in enumerate(rng.uniform(-1, 1, N))), DimSchema(("z",)))
iu = np.triu_indices(N, 1)
keep = rng.random(len(iu[0])) < 0.3
g = Graph(np.column_stack([iu[0][keep], iu[1][keep]]), N)
mp = ModelParams(0.8, 0.7, FieldParams({"z": 1.0}), KernelParams(0.0))

p, logZ = exact_boltzmann(pop, g, mp)
codes = glauber_chain(pop, g, mp, 500_000, rng)
emp = np.bincount(codes, minlength=2**N) / len(codes)
print("edges", g.n_edges, " log Z %.4f" % logZ)
print("total variation distance %.4f" % (0.5 * np.abs(emp - p).sum()))

top = np.argsort(p)[::-1][:5]
for c in top:
    print("state %s  exact %.4f  chain %.4f" % (format(c, f"0{N}b")[::-1], p[c], emp[c]))

# strong coupling on a dense graph: single-spin moves cross between the
# two aligned states only rarely, and the chain estimate degrades
mp_cold = mp.replace(beta=2.0, J=2.0)
p, _ = exact_boltzmann(pop, g, mp_cold)
emp = np.bincount(glauber_chain(pop, g, mp_cold, 500_000, rng), minlength=2**N) / 500_000
print("cold chain TV %.4f" % (0.5 * np.abs(emp - p).sum()))
