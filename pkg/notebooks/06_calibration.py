"""
Least squares for pinned field coefficients
===========================================

Before inference one field coefficient is fixed to remove a scale
degeneracy. A regression of outcomes on covariates gives a sensible value
and sign for it.
"""

import numpy as np

from kbi.blau_space import site_distances
from kbi.calibration import ols
from kbi.synth import generate_snapshot, grid_truth, make_grid

pop = make_grid(10, 100)
truth = grid_truth(J=0.0)
snap = generate_snapshot(pop, site_distances(pop), truth, np.random.default_rng(5), sweeps=200)
pop = pop.with_observed(snap.S.tolist())

for weighted in (False, True):
    res = ols(pop, ["x", "y"], weighted=weighted)
    print("weighted" if weighted else "plain   ", {k: round(v, 4) for k, v in res.as_dict().items()})
# a down-spin fraction rises with y and falls with x, matching h_x > 0 and h_y < 0
