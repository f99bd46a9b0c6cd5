"""Counterfactual scenarios and outcome polarisation.

A scenario edits a copy of a simulation context (coordinates, model
parameters or the sampled graph) and the edited model is re-simulated.
Coordinate edits are re-standardised with the baseline's frozen
mean/std so fitted kernel coefficients keep their meaning.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .abc import GaussianPosterior
from .blau_space import DistanceTable, Population, apply_standardisation, raw_distances, standardise
from .kernel_graph import Graph, randomise_links, sample_graph
from .prediction import unit_members
from .rng import SCENARIO, task_rng
from .spin_model import DEFAULT_SWEEPS, ModelParams, Summary, glauber_sample, initial_spins, summarise
from .tasks import run_tasks


def polarisation(s) -> float:
    """Mean absolute difference over all unordered pairs of unit outcomes.

    Measures dispersion between units, not distance from an even split:
    any constant vector scores 0. NaN entries are ignored.
    """
    S = np.asarray(s.S if isinstance(s, Summary) else s, dtype=float)
    S = np.sort(S[~np.isnan(S)])
    n = len(S)
    if n < 2:
        raise ValueError("polarisation needs at least two units")
    # sum_{i<j} (S_j - S_i) written over sorted gaps, so equal values give
    # exact zeros: gap k is spanned by (k + 1) * (n - k - 1) pairs
    k = np.arange(1, n)
    total = np.sum(np.diff(S) * (k * (n - k)))
    return float(total / (n * (n - 1) / 2))


# -- scenarios -------------------------------------------------------------


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class IncomeRedistribution:
    """Set the incomes of the k_low poorest and k_high richest sites to their
    population-weighted mean (total income conserved)."""

    k_low: int
    k_high: int
    dimension: str = "income"


@dataclass(frozen=True)
class RemoveHomophily:
    dimensions: tuple[str, ...]


@dataclass(frozen=True)
class DensityShift:
    """theta0 -> theta0 * multiplier + delta (lower theta0 means denser)."""

    delta: float = 0.0
    multiplier: float = 1.0


@dataclass(frozen=True)
class StrengthShift:
    multiplier: float


@dataclass(frozen=True)
class NoiseShift:
    beta: float


@dataclass(frozen=True)
class FieldShift:
    dimension: str
    delta: float


@dataclass(frozen=True)
class RandomiseLinks:
    pass


@dataclass(frozen=True)
class PinSpins:
    """Hold a fraction of the spins of one unit (site or group) at ``value``."""

    unit: str
    fraction: float
    value: int = 1
    exclude_from_summary: bool = True


Scenario = (
    Identity | IncomeRedistribution | RemoveHomophily | DensityShift | StrengthShift
    | NoiseShift | FieldShift | RandomiseLinks | PinSpins
)

_TYPES = {
    "identity": Identity,
    "income_redistribution": IncomeRedistribution,
    "remove_homophily": RemoveHomophily,
    "density_shift": DensityShift,
    "strength_shift": StrengthShift,
    "noise_shift": NoiseShift,
    "field_shift": FieldShift,
    "randomise_links": RandomiseLinks,
    "pin_spins": PinSpins,
}


def validate_scenario(sc) -> None:
    if isinstance(sc, IncomeRedistribution):
        if sc.k_low < 0 or sc.k_high < 0 or sc.k_low + sc.k_high < 1:
            raise ValueError("income redistribution needs k_low, k_high >= 0 and at least one site")
    elif isinstance(sc, RemoveHomophily):
        if not sc.dimensions:
            raise ValueError("remove_homophily needs at least one dimension")
    elif isinstance(sc, DensityShift):
        if not sc.multiplier > 0:
            raise ValueError("density multiplier must be > 0")
    elif isinstance(sc, StrengthShift):
        if not sc.multiplier >= 0:
            raise ValueError("strength multiplier must be >= 0")
    elif isinstance(sc, NoiseShift):
        if not sc.beta >= 0:
            raise ValueError("beta must be >= 0")
    elif isinstance(sc, PinSpins):
        if not 0 <= sc.fraction <= 1:
            raise ValueError("pinned fraction must lie in [0, 1]")
        if sc.value not in (-1, 1):
            raise ValueError("pinned value must be -1 or +1")
    elif not isinstance(sc, (Identity, FieldShift, RandomiseLinks)):
        raise TypeError(f"not a scenario: {sc!r}")


def scenario_from_json(obj: Mapping):
    """Build a scenario from ``{"type": <tag>, ...parameters}``."""
    obj = dict(obj)
    tag = obj.pop("type", None)
    if tag not in _TYPES:
        raise ValueError(f"unknown scenario type {tag!r}; expected one of {sorted(_TYPES)}")
    if tag == "remove_homophily":
        dims = obj.get("dimensions")
        obj["dimensions"] = (dims,) if isinstance(dims, str) else tuple(dims or ())
    try:
        sc = _TYPES[tag](**obj)
    except TypeError as exc:
        raise ValueError(f"bad parameters for scenario {tag!r}: {exc}") from None
    validate_scenario(sc)
    return sc


def scenario_to_json(sc) -> dict:
    tag = next(k for k, v in _TYPES.items() if isinstance(sc, v))
    out = {"type": tag}
    out.update({k: list(v) if isinstance(v, tuple) else v for k, v in sc.__dict__.items()})
    return out


@dataclass(frozen=True, eq=False)
class Context:
    """Everything a simulation needs, plus the scenario-level switches."""

    pop: Population
    dt: DistanceTable  # standardised
    params: ModelParams | None = None
    randomise: bool = False
    pin: PinSpins | None = None
    report: tuple[int, ...] | None = None  # site indices that enter summaries

    @classmethod
    def from_population(cls, pop: Population, params: ModelParams | None = None) -> "Context":
        return cls(pop, standardise(raw_distances(pop)), params)

    def reported_sites(self) -> np.ndarray:
        return np.arange(self.pop.C) if self.report is None else np.array(self.report, dtype=np.int64)


def _redistribute(pop: Population, sc: IncomeRedistribution) -> np.ndarray:
    dims = pop.schema.dims
    if sc.dimension not in dims:
        raise KeyError(f"population has no {sc.dimension!r} dimension")
    if sc.k_low + sc.k_high > pop.C:
        raise ValueError(f"k_low + k_high = {sc.k_low + sc.k_high} exceeds the {pop.C} sites")
    coords = pop.coords.copy()
    j = dims.index(sc.dimension)
    order = np.argsort(coords[:, j], kind="stable")
    chosen = np.concatenate([order[: sc.k_low], order[pop.C - sc.k_high:]])
    n = pop.sizes[chosen].astype(float)
    coords[chosen, j] = np.sum(n * coords[chosen, j]) / n.sum()
    return coords


def apply_scenario(ctx: Context, sc) -> Context:
    """Return an edited copy of ``ctx``; ``ctx`` itself is left untouched."""
    validate_scenario(sc)
    p = ctx.params
    if isinstance(sc, Identity):
        return replace(ctx)
    if isinstance(sc, IncomeRedistribution):
        pop = ctx.pop.with_coords(_redistribute(ctx.pop, sc))
        if ctx.dt.standardised:
            dt = apply_standardisation(raw_distances(pop), ctx.dt.mean, ctx.dt.std)
        else:
            dt = raw_distances(pop)
        return replace(ctx, pop=pop, dt=dt)
    if isinstance(sc, RandomiseLinks):
        return replace(ctx, randomise=True)
    if isinstance(sc, PinSpins):
        members = unit_members(ctx.pop, sc.unit)
        report = ctx.reported_sites()
        if sc.exclude_from_summary:
            report = np.array([c for c in report if c not in members], dtype=np.int64)
        return replace(ctx, pin=sc, report=tuple(int(c) for c in report))

    if p is None:
        raise ValueError("parameter scenarios need model parameters in the context")
    if isinstance(sc, RemoveHomophily):
        unknown = set(sc.dimensions) - set(ctx.dt.dims)
        if unknown:
            raise KeyError(f"unknown kernel dimensions {sorted(unknown)}")
        p = p.replace(**{f"theta_{d}": 0.0 for d in sc.dimensions})
    elif isinstance(sc, DensityShift):
        p = p.replace(theta0=p.kernel.theta0 * sc.multiplier + sc.delta)
    elif isinstance(sc, StrengthShift):
        p = p.replace(J=p.J * sc.multiplier)
    elif isinstance(sc, NoiseShift):
        p = p.replace(beta=sc.beta)
    elif isinstance(sc, FieldShift):
        if sc.dimension not in ctx.pop.schema.dims:
            raise KeyError(f"unknown field dimension {sc.dimension!r}")
        p = p.replace(**{f"h_{sc.dimension}": p.fields.h.get(sc.dimension, 0.0) + sc.delta})
    return replace(ctx, params=p)


def simulate_context(ctx: Context, rng: np.random.Generator, sweeps: int = DEFAULT_SWEEPS) -> Summary:
    """One graph + spin draw under ``ctx``, summarised on its reported sites."""
    pop, p = ctx.pop, ctx.params
    if p is None:
        raise ValueError("context has no model parameters")
    g = sample_graph(pop, ctx.dt, p.kernel, rng) if p.J != 0 else Graph(np.zeros((0, 2), np.int64), pop.N, pop.offsets)
    if ctx.randomise:
        g = randomise_links(g, rng)
    init, pinned = "field", None
    if ctx.pin is not None and ctx.pin.fraction > 0:
        init = initial_spins(pop, p.fields, rng, "field")
        pinned = np.zeros(pop.N, bool)
        off = pop.offsets
        for c in unit_members(pop, ctx.pin.unit):
            k = int(round(ctx.pin.fraction * pop.sites[c].n))
            idx = off[c] + rng.choice(pop.sites[c].n, size=k, replace=False)
            pinned[idx] = True
        init[pinned] = ctx.pin.value
    sc = glauber_sample(pop, g, p, sweeps, rng, init=init, pinned=pinned)
    full = summarise(sc, pop)
    keep = ctx.reported_sites()
    return Summary([full.ids[c] for c in keep], full.n[keep], full.S[keep])


@dataclass(frozen=True)
class ScenarioResult:
    site_ids: tuple[str, ...]
    base: np.ndarray  # (reps, sites) outcomes without the intervention
    scenario: np.ndarray  # (reps, sites) outcomes with it
    polarisation_base: np.ndarray  # per rep
    polarisation_scenario: np.ndarray

    def summary(self) -> dict:
        return {
            "reps": int(len(self.polarisation_base)),
            "polarisation_base": float(np.mean(self.polarisation_base)),
            "polarisation_scenario": float(np.mean(self.polarisation_scenario)),
            "polarisation_base_std": float(np.std(self.polarisation_base)),
            "polarisation_scenario_std": float(np.std(self.polarisation_scenario)),
            "mean_outcome_base": float(np.mean(self.base)),
            "mean_outcome_scenario": float(np.mean(self.scenario)),
        }

    def histogram(self, bins: int = 20) -> dict:
        edges = np.linspace(0.0, 1.0, bins + 1)
        return {
            "edges": edges,
            "base": np.histogram(self.base.ravel(), edges, density=True)[0],
            "scenario": np.histogram(self.scenario.ravel(), edges, density=True)[0],
        }


def _scenario_rep(r: int, c: dict):
    rng = task_rng(c["seed"], r, SCENARIO)
    theta = c["theta"] if c["gaussian"] is None else c["gaussian"].draw(rng)
    base_ctx = replace(c["ctx"], params=theta)
    mod = apply_scenario(base_ctx, c["scenario"])
    # the baseline is scored on the same reported sites as the scenario
    base_ctx = replace(base_ctx, report=mod.report)
    sim_seed = int(rng.integers(0, 2**63 - 1))
    base = simulate_context(base_ctx, np.random.default_rng(sim_seed), c["sweeps"])
    scen = simulate_context(mod, np.random.default_rng(sim_seed), c["sweeps"])
    return base.S, scen.S, base.ids


def run_scenario(
    ctx: Context,
    scenario,
    posterior: GaussianPosterior | ModelParams,
    reps: int = 100,
    seed: int = 0,
    sweeps: int = DEFAULT_SWEEPS,
    workers: int = 1,
) -> ScenarioResult:
    """Simulate ``reps`` paired (baseline, scenario) outcomes.

    Each rep draws one parameter set from the Gaussian posterior (or uses
    fixed parameters) and runs the baseline and the scenario off the same
    random seed, so the pair differs only through the intervention.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    validate_scenario(scenario)
    c = {
        "ctx": ctx, "scenario": scenario, "seed": int(seed), "sweeps": int(sweeps),
        "gaussian": posterior if isinstance(posterior, GaussianPosterior) else None,
        "theta": posterior if isinstance(posterior, ModelParams) else None,
    }
    rows = run_tasks(_scenario_rep, c, range(reps), workers)
    base = np.array([r[0] for r in rows])
    scen = np.array([r[1] for r in rows])
    return ScenarioResult(
        tuple(rows[0][2]), base, scen,
        np.array([polarisation(b) for b in base]), np.array([polarisation(s) for s in scen]),
    )


def write_outcomes(res: ScenarioResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "arm", *res.site_ids])
        for r in range(len(res.base)):
            w.writerow([r, "base", *map(repr, res.base[r].tolist())])
            w.writerow([r, "scenario", *map(repr, res.scenario[r].tolist())])


def write_result_json(res: ScenarioResult, path, scenario=None) -> None:
    out = res.summary()
    if scenario is not None:
        out["scenario"] = scenario_to_json(scenario)
    Path(path).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8")
