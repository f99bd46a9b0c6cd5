"""
Sampling a social network on the synthetic grid
===============================================

Cells on a 10 x 10 grid hold 100 spins each. Links form with a logistic
kernel of the (standardised) coordinate distance, so nearby cells are far
more likely to be connected.
"""

import numpy as np

from kbi.blau_space import raw_distances, site_distances
from kbi.kernel_graph import degree_stats, kernel_matrix, link_distance_stats, rescale_theta0, sample_graph
from kbi.synth import grid_truth, make_grid

rng = np.random.default_rng(0)
pop = make_grid(10, 100)
dt = site_distances(pop)
kp = grid_truth().kernel
print("spins", pop.N, "cells", pop.C)

# link probability falls off along x much faster than along y
rho = kernel_matrix(dt, kp)
print("rho to the cell itself   %.2e" % rho[0, 0])
print("rho one step along x     %.2e" % rho[0, pop.index("1_0")])
print("rho one step along y     %.2e" % rho[0, pop.index("0_1")])

g = sample_graph(pop, dt, kp, rng)
stats = degree_stats(g)
print("mean degree %.2f, degree variance %.2f" % (stats["mean"], stats["variance"]))
print("median link length per axis", link_distance_stats(g, pop, raw_distances(pop))["medians"])

# a smaller population keeps the same neighbourhoods once theta0 is rescaled
small = make_grid(10, 10)
theta0 = rescale_theta0(kp.theta0, pop.N, small.N)
g_small = sample_graph(small, site_distances(small), kp.__class__(theta0, kp.theta), rng)
print("10 spins per cell: theta0 %.3f, mean degree %.2f" % (theta0, degree_stats(g_small)["mean"]))
