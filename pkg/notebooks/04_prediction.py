"""
Predicting held-out outcomes
============================

Cells carry one covariate ``e`` that sets their field, scattered at random
over a km grid. Strong, spatially local coupling makes outcomes spill over
between neighbouring cells, which a fields-only model cannot represent.
We train on 24 cells and predict the other 12 with the full model, with
the coupling pinned to zero, and with the weighted training mean.
"""

import numpy as np

from kbi.abc import PriorSpec, run_abc
from kbi.blau_space import site_distances
from kbi.prediction import SplitSpec, ef_only, null_eta, null_model, predict, training_summary
from kbi.spin_model import simulate, summarise
from kbi.synth import spillover_population, spillover_truth

rng = np.random.default_rng(600)
pop = spillover_population(rng)
dt = site_distances(pop)
truth = spillover_truth()
_, sc = simulate(pop, dt, truth, 500, rng)
pop = pop.with_observed(summarise(sc, pop).S.tolist())

order = rng.permutation(pop.C)
split = SplitSpec([pop.ids[i] for i in order[12:]], [pop.ids[i] for i in order[:12]])
observed = training_summary(pop, split)

priors = PriorSpec(
    {"beta": (0, 2), "J": (0, 10), "h0": (-1, 1), "theta_distance": (0, 6)},
    {"h_e": 1.0, "theta0": 9.0, "theta_e": 0.5},
)
for label, pri in [("network + fields", priors), ("fields only", ef_only(priors))]:
    ps = run_abc(pop, dt, pri, observed, budget=300, keep=20, sweeps=200, seed=1)
    res = predict(pop, dt, ps, split, T=20, sweeps=200, seed=1)
    print("%-17s training eta %.3f   mean test eta %.4f" % (label, ps.etas[0], res.mean_eta))
print("%-17s prediction %.3f        mean test eta %.4f" % ("training mean", null_model(pop, split), null_eta(pop, split)))
