"""Held-out outcome prediction and its baselines.

A split names training sites and test units. A test unit is either a site
or a group id, in which case it stands for every site carrying that group
and is scored on the population-weighted mean of its members.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .abc import PosteriorSet, PriorSpec
from .blau_space import DataError, DistanceTable, Population
from .rng import PREDICT, task_rng
from .spin_model import DEFAULT_SWEEPS, Summary, simulate, summarise
from .tasks import run_tasks

DEFAULT_T = 100


@dataclass(frozen=True)
class SplitSpec:
    train: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        overlap = set(self.train) & set(self.test)
        if overlap:
            raise DataError(f"units in both train and test: {sorted(overlap)[:5]}")

    def validate(self, pop: Population) -> None:
        ids = set(pop.ids)
        groups = {g for g in pop.groups if g is not None}
        bad = [t for t in self.train if t not in ids]
        if bad:
            raise DataError(f"train ids are not sites: {bad[:5]}")
        bad = [t for t in self.test if t not in ids and t not in groups]
        if bad:
            raise DataError(f"test ids are neither sites nor groups: {bad[:5]}")
        train_idx = set(self.train)
        clash = [t for t in self.test for c in unit_members(pop, t) if pop.ids[c] in train_idx]
        if clash:
            raise DataError(f"test units share sites with the training set: {clash[:5]}")


def load_split(path) -> SplitSpec:
    train, test = [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"id", "role"}:
            raise DataError(f"{path}: expected header id,role")
        for r, row in enumerate(reader, start=2):
            role = row["role"].strip()
            if role == "train":
                train.append(row["id"].strip())
            elif role == "test":
                test.append(row["id"].strip())
            else:
                raise DataError(f"{path} row {r}: role must be train or test, got {role!r}")
    return SplitSpec(train, test)


def write_split(split: SplitSpec, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "role"])
        w.writerows([(i, "train") for i in split.train] + [(i, "test") for i in split.test])


def unit_members(pop: Population, unit: str) -> list[int]:
    ids = pop.ids
    if unit in ids:
        return [ids.index(unit)]
    members = [c for c, g in enumerate(pop.groups) if g == unit]
    if not members:
        raise KeyError(unit)
    return members


def unit_fractions(pop: Population, S: np.ndarray, units: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Population-weighted unit fractions and unit weights from site fractions."""
    n = pop.sizes.astype(float)
    w = np.empty(len(units))
    out = np.empty(len(units))
    for u, unit in enumerate(units):
        m = unit_members(pop, unit)
        w[u] = n[m].sum()
        out[u] = np.sum(n[m] * S[m]) / w[u]
    return out, w


def training_summary(pop: Population, split: SplitSpec) -> Summary:
    """Observed summary with every non-training site masked out."""
    split.validate(pop)
    keep = np.isin(pop.ids, split.train)
    S = np.where(keep, pop.observed, np.nan)
    if np.isnan(S).all():
        raise DataError("training set has no observed outcomes")
    return Summary(pop.ids, pop.sizes, S, tuple(pop.groups))


def ef_only(priors: PriorSpec) -> PriorSpec:
    """Same priors with the coupling pinned to zero (external fields only)."""
    free = {k: v for k, v in priors.free.items() if k != "J"}
    pinned = dict(priors.pinned)
    pinned["J"] = 0.0
    return PriorSpec(free, pinned)


def null_model(pop: Population, split: SplitSpec) -> float:
    """Population-weighted mean training outcome, predicted for every test unit."""
    if not split.train:
        raise DataError("empty training set")
    idx = [pop.index(t) for t in split.train]
    S = pop.observed[idx]
    n = pop.sizes[idx].astype(float)
    ok = ~np.isnan(S)
    if not ok.any():
        raise DataError("training set has no observed outcomes")
    return float(np.sum(n[ok] * S[ok]) / np.sum(n[ok]))


def null_eta(pop: Population, split: SplitSpec) -> float:
    """Test distance of the null model: weighted mean |S_test - train mean|."""
    s0 = null_model(pop, split)
    truth, w = unit_fractions(pop, pop.observed, split.test)
    return float(np.sum(w * np.abs(truth - s0)) / np.sum(w))


@dataclass(frozen=True)
class Prediction:
    units: tuple[str, ...]
    mean: np.ndarray  # mean predicted fraction over the T parameter sets
    std: np.ndarray
    truth: np.ndarray  # NaN where the test outcome is unknown
    per_set: np.ndarray  # (T, n_units)
    set_eta: np.ndarray  # test distance for each parameter set

    @property
    def mean_eta(self) -> float:
        return float(np.mean(self.set_eta))


def _predict_one(t: int, ctx: dict):
    rng = task_rng(ctx["seed"], t, PREDICT)
    pop, units = ctx["pop"], ctx["units"]
    theta = ctx["thetas"][t]
    S = np.zeros(len(units))
    for _ in range(ctx["reps"]):
        _, sc = simulate(pop, ctx["dt"], theta, ctx["sweeps"], rng)
        S += unit_fractions(pop, summarise(sc, pop).S, units)[0]
    return S / ctx["reps"]


def predict(
    pop: Population,
    dt: DistanceTable,
    ps: PosteriorSet,
    split: SplitSpec,
    T: int = DEFAULT_T,
    reps: int = 1,
    sweeps: int = DEFAULT_SWEEPS,
    seed: int = 0,
    workers: int = 1,
) -> Prediction:
    """Simulate the whole population at each of the T best parameter sets
    and score only the test units."""
    if not split.test:
        raise DataError("empty test set")
    if not 1 <= T <= ps.keep:
        raise ValueError(f"T must lie in [1, {ps.keep}], got {T}")
    split.validate(pop)
    units = tuple(split.test)
    ctx = {
        "pop": pop, "dt": dt, "units": units, "reps": int(reps), "sweeps": int(sweeps), "seed": int(seed),
        "thetas": [s.theta for s in ps.samples[:T]],
    }
    per_set = np.array(run_tasks(_predict_one, ctx, range(T), workers))
    truth, w = unit_fractions(pop, pop.observed, units)
    if np.isnan(truth).any():
        set_eta = np.full(T, np.nan)
    else:
        set_eta = np.sum(w * np.abs(per_set - truth), axis=1) / np.sum(w)
    return Prediction(units, per_set.mean(axis=0), per_set.std(axis=0), truth, per_set, set_eta)
