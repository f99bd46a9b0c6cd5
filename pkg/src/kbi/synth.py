"""Synthetic grid populations and snapshots for recovery experiments."""

from __future__ import annotations

import math

import numpy as np

from .blau_space import DimSchema, DistanceTable, Population, Site
from .kernel_graph import KernelParams, rescale_theta0
from .spin_model import DEFAULT_SWEEPS, FieldParams, ModelParams, Summary, simulate, summarise

# Ground truth of the 10 x 10 grid experiment with 100 spins per cell.
FULL_SIDE = 10
FULL_SPINS_PER_CELL = 100
FULL_THETA0 = 9.0
DESK_SPINS_PER_CELL = 10


def make_grid(side: int, spins_per_cell: int) -> Population:
    """side x side cells at integer (x, y), each holding ``spins_per_cell`` spins."""
    if side < 1 or spins_per_cell < 1:
        raise ValueError("side and spins_per_cell must be positive")
    sites = [
        Site(f"{x}_{y}", (float(x), float(y)), spins_per_cell)
        for y in range(side)
        for x in range(side)
    ]
    return Population(tuple(sites), DimSchema(("x", "y")))


def grid_truth(J: float = 5.0, spins_per_cell: int = FULL_SPINS_PER_CELL, side: int = FULL_SIDE, beta: float = 0.3) -> ModelParams:
    """Grid-experiment parameters, with theta0 rescaled from the
    100-spins-per-cell reference to the requested cell size."""
    theta0 = rescale_theta0(FULL_THETA0, side * side * FULL_SPINS_PER_CELL, side * side * spins_per_cell)
    return ModelParams(
        beta=beta,
        J=J,
        fields=FieldParams({"x": 1.0, "y": -1.0}),
        kernel=KernelParams(theta0, {"x": 2.0, "y": 0.5}),
    )


def desk_theta0() -> float:
    return FULL_THETA0 - math.log(FULL_SPINS_PER_CELL / DESK_SPINS_PER_CELL)


def generate_snapshot(
    pop: Population,
    dt: DistanceTable,
    mp: ModelParams,
    rng: np.random.Generator,
    sweeps: int = DEFAULT_SWEEPS,
) -> Summary:
    """One graph and one Glauber draw at ``mp``, summarised per site."""
    _, sc = simulate(pop, dt, mp, sweeps, rng)
    return summarise(sc, pop)


def polarisation_fixture(side: int = 6, spins_per_cell: int = 200) -> tuple[Population, ModelParams]:
    """Homophilous grid where coupling pulls sites toward a field-biased
    majority.

    Links prefer nearby cells, so removing homophily spreads that pull and
    lowers polarisation, while dropping the coupling removes it and raises
    polarisation. theta0 is set for 100 spins per cell and rescaled.
    """
    pop = make_grid(side, spins_per_cell)
    theta0 = rescale_theta0(8.0, side * side * 100, pop.N)
    mp = ModelParams(
        beta=0.3,
        J=2.0,
        fields=FieldParams({"x": 1.0, "y": -1.0}, h0=1.0),
        kernel=KernelParams(theta0, {"x": 0.5, "y": 0.5}),
    )
    return pop, mp


def spillover_population(rng: np.random.Generator, side: int = 6, spins_per_cell: int = 100) -> Population:
    """Cells on a km grid with one standard-normal covariate ``e`` per cell.

    ``e`` carries the external field and is independent of position, so any
    spatial smoothing of outcomes has to come through the network.
    """
    e = rng.normal(size=side * side)
    sites = [
        Site(f"c{i}", (float(e[i]), float(i % side), float(i // side)), spins_per_cell)
        for i in range(side * side)
    ]
    return Population(tuple(sites), DimSchema(("e",), spatial=True))


def spillover_truth(J: float = 5.0) -> ModelParams:
    """Strong, spatially local coupling (mean degree about 3.5 at 100 spins per cell)."""
    return ModelParams(
        beta=1.0,
        J=J,
        fields=FieldParams({"e": 1.0}),
        kernel=KernelParams(9.0, {"e": 0.5, "distance": 4.0}),
    )
