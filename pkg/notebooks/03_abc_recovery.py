"""
Recovering grid parameters with ABC
===================================

A snapshot is generated at known parameters on the desk-scale grid, then
ABC draws parameters from uniform boxes, simulates each, and keeps the
closest draws. The budget here is small so the script runs in a couple of
minutes; the acceptance suite uses 20,000 draws.
"""

import sys

import numpy as np

from kbi.abc import PriorSpec, coverage_check, gaussian_fit, run_abc
from kbi.blau_space import site_distances
from kbi.synth import generate_snapshot, grid_truth, make_grid
from kbi.tasks import default_workers

budget = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
pop = make_grid(10, 10)
dt = site_distances(pop)
truth = grid_truth(J=5.0, spins_per_cell=10)
observed = generate_snapshot(pop, dt, truth, np.random.default_rng(2024))

priors = PriorSpec(
    {"beta": (0, 2), "h_y": (-1.5, 0.5), "theta_x": (-0.5, 4.5), "theta_y": (-2.5, 2.5), "J": (0, 10)},
    {"h_x": 1.0, "theta0": truth.kernel.theta0},
)
ps = run_abc(pop, dt, priors, observed, budget=budget, keep=budget // 40, sweeps=500, seed=3, workers=default_workers())
print("kept %d of %d draws, eta %.3f .. %.3f" % (ps.keep, budget, ps.etas[0], ps.etas[-1]))

vals = ps.values(ps.free_names)
for j, name in enumerate(ps.free_names):
    lo, med, hi = np.quantile(vals[:, j], [0.05, 0.5, 0.95])
    print("%-8s true %6.2f   median %6.2f   90%% [%6.2f, %6.2f]" % (name, truth.to_flat()[name], med, lo, hi))
print("inside 90% interval:", coverage_check(ps, truth))

g = gaussian_fit(ps)
print("Gaussian fit mean", {k: round(float(v), 3) for k, v in zip(g.names, g.mean)})
