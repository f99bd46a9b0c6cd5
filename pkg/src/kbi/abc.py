"""ABC rejection over (beta, h, J, theta) with top-K selection.

Each draw proposes parameters from independent uniform priors, samples one
graph and one spin configuration, and scores the simulated site summaries
against the observation with the weighted mean absolute error. The K draws
with the smallest error form the posterior sample.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import gaussian_kde

from . import __version__
from .blau_space import DistanceTable, Population
from .rng import ABC, task_rng
from .tasks import run_tasks
from .spin_model import DEFAULT_SWEEPS, ModelParams, Summary, eta, parameter_names, simulate, summarise

DEFAULT_BUDGET = 50_000
DEFAULT_KEEP = 500


class PriorError(ValueError):
    pass


@dataclass(frozen=True)
class PriorSpec:
    """Uniform bounds for free parameters and fixed values for pinned ones.

    ``h0`` is pinned to 0 unless listed explicitly.
    """

    free: Mapping[str, tuple[float, float]]
    pinned: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        free = {k: (float(lo), float(hi)) for k, (lo, hi) in dict(self.free).items()}
        pinned = {k: float(v) for k, v in dict(self.pinned).items()}
        both = set(free) & set(pinned)
        if both:
            raise PriorError(f"parameters both free and pinned: {sorted(both)}")
        if "h0" not in free and "h0" not in pinned:
            pinned["h0"] = 0.0
        for k, (lo, hi) in free.items():
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise PriorError(f"prior for {k!r}: lower bound {lo} must be below upper bound {hi}")
        if "beta" in free and free["beta"][0] < 0:
            raise PriorError("prior for 'beta' must not extend below 0")
        if "beta" in pinned and pinned["beta"] < 0:
            raise PriorError("pinned 'beta' must be >= 0")
        object.__setattr__(self, "free", free)
        object.__setattr__(self, "pinned", pinned)

    @property
    def free_names(self) -> list[str]:
        return sorted(self.free)

    def check_covers(self, pop: Population) -> None:
        """Every model parameter must be covered exactly once."""
        need = set(parameter_names(pop))
        have = set(self.free) | set(self.pinned)
        if have - need:
            raise PriorError(f"priors name unknown parameters: {sorted(have - need)}")
        if need - have:
            raise PriorError(f"priors missing for parameters: {sorted(need - have)}")

    def draw(self, rng: np.random.Generator) -> dict[str, float]:
        names = self.free_names
        lo = np.array([self.free[k][0] for k in names])
        hi = np.array([self.free[k][1] for k in names])
        u = rng.random(len(names))
        flat = dict(self.pinned)
        flat.update(zip(names, (lo + (hi - lo) * u).tolist()))
        return flat

    def to_json(self) -> dict:
        return {"free": {k: list(v) for k, v in sorted(self.free.items())}, "pinned": dict(sorted(self.pinned.items()))}

    @classmethod
    def from_json(cls, obj: Mapping) -> "PriorSpec":
        try:
            free = {k: tuple(v) for k, v in obj.get("free", {}).items()}
            for k, v in free.items():
                if len(v) != 2:
                    raise PriorError(f"prior for {k!r} needs [lower, upper]")
            return cls(free, obj.get("pinned", {}))
        except (TypeError, AttributeError) as exc:
            raise PriorError(f"malformed priors: {exc}") from None


@dataclass(frozen=True)
class PosteriorSample:
    theta: ModelParams
    eta: float
    draw_index: int  # the draw's stream index under the run's master seed


@dataclass(frozen=True)
class PosteriorSet:
    samples: tuple[PosteriorSample, ...]
    budget: int
    names: tuple[str, ...]  # every parameter, free and pinned
    free_names: tuple[str, ...]

    @property
    def keep(self) -> int:
        return len(self.samples)

    @property
    def etas(self) -> np.ndarray:
        return np.array([s.eta for s in self.samples])

    def values(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.names if names is None else names
        flats = [s.theta.to_flat() for s in self.samples]
        return np.array([[f[n] for n in names] for f in flats], dtype=float).reshape(len(flats), len(names))

    def best(self, T: int) -> "PosteriorSet":
        return PosteriorSet(self.samples[:T], self.budget, self.names, self.free_names)


# -- draw evaluation ------------------------------------------------------


def _evaluate(index: int, ctx: dict) -> tuple[int, float, dict]:
    rng = task_rng(ctx["seed"], index, ABC)
    flat = ctx["priors"].draw(rng)
    mp = ModelParams.from_flat(flat)
    _, sc = simulate(ctx["pop"], ctx["dt"], mp, ctx["sweeps"], rng)
    return index, eta(ctx["observed"], summarise(sc, ctx["pop"])), flat


def run_abc(
    pop: Population,
    dt: DistanceTable,
    priors: PriorSpec,
    observed: Summary,
    budget: int = DEFAULT_BUDGET,
    keep: int = DEFAULT_KEEP,
    sweeps: int = DEFAULT_SWEEPS,
    seed: int = 0,
    workers: int = 1,
) -> PosteriorSet:
    """Run ``budget`` prior draws and keep the ``keep`` closest to ``observed``.

    The result depends only on (seed, priors, budget, data, sweeps): draw i
    always uses stream i of the master seed, whatever the worker count.
    Ties in the error are broken by draw index.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if not 1 <= keep <= budget:
        raise ValueError(f"keep must lie in [1, budget], got {keep}")
    if not priors.free and set(priors.pinned) <= {"h0"}:
        raise PriorError("empty priors")
    priors.check_covers(pop)
    if observed.ids != tuple(pop.ids) or not np.array_equal(observed.n, pop.sizes):
        raise ValueError("observed summary does not match the population's sites")
    if np.all(np.isnan(observed.S)):
        raise ValueError("observed summary has no observed sites")

    ctx = {"pop": pop, "dt": dt, "priors": priors, "observed": observed, "sweeps": int(sweeps), "seed": int(seed)}
    results = run_tasks(_evaluate, ctx, range(budget), workers)
    results.sort(key=lambda r: (r[1], r[0]))
    samples = tuple(PosteriorSample(ModelParams.from_flat(flat), e, i) for i, e, flat in results[:keep])
    names = tuple(parameter_names(pop))
    return PosteriorSet(samples, budget, names, tuple(priors.free_names))


# -- posterior summaries ----------------------------------------------------


def marginal_histograms(ps: PosteriorSet, bins: int = 30, grid_points: int = 200) -> dict:
    """Per-parameter histogram plus a Gaussian KDE on a grid.

    A parameter with no spread gets a single-bin spike and no KDE curve.
    """
    if ps.keep == 0:
        raise ValueError("empty posterior set")
    out = {}
    vals = ps.values()
    for j, name in enumerate(ps.names):
        v = vals[:, j]
        lo, hi = float(v.min()), float(v.max())
        if hi - lo <= 1e-12 * max(1.0, abs(lo)):
            out[name] = {"edges": np.array([lo - 0.5, lo + 0.5]), "counts": np.array([len(v)]), "grid": None, "kde": None}
            continue
        counts, edges = np.histogram(v, bins=bins)
        grid = np.linspace(lo, hi, grid_points)
        try:
            kde = gaussian_kde(v)(grid)
        except np.linalg.LinAlgError:
            kde = None
        out[name] = {"edges": edges, "counts": counts, "grid": grid, "kde": kde}
    return out


@dataclass(frozen=True)
class GaussianPosterior:
    """Multivariate normal fitted to the free parameters of a posterior set."""

    names: tuple[str, ...]
    mean: np.ndarray
    cov: np.ndarray
    pinned: Mapping[str, float]

    def draw_flat(self, n: int, rng: np.random.Generator) -> np.ndarray:
        x = rng.multivariate_normal(self.mean, self.cov, size=n, method="eigh")
        if "beta" in self.names:
            b = self.names.index("beta")
            x[:, b] = np.maximum(x[:, b], 0.0)
        return x

    def draw(self, rng: np.random.Generator) -> ModelParams:
        flat = dict(self.pinned)
        flat.update(zip(self.names, self.draw_flat(1, rng)[0].tolist()))
        return ModelParams.from_flat(flat)


def gaussian_fit(ps: PosteriorSet) -> GaussianPosterior:
    if ps.keep < 2:
        raise ValueError("a Gaussian fit needs at least two samples")
    names = tuple(ps.free_names)
    x = ps.values(names)
    first = ps.samples[0].theta.to_flat()
    pinned = {k: v for k, v in first.items() if k not in names}
    return GaussianPosterior(names, x.mean(axis=0), np.atleast_2d(np.cov(x, rowvar=False)), pinned)


def coverage_check(ps: PosteriorSet, truth: ModelParams, level: float = 0.9, names: Sequence[str] | None = None) -> dict[str, bool]:
    """Whether each true value lies inside the central ``level`` interval of its marginal."""
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    names = ps.free_names if names is None else names
    vals = ps.values(names)
    flat = truth.to_flat()
    q = [(1 - level) / 2, (1 + level) / 2]
    out = {}
    for j, name in enumerate(names):
        lo, hi = np.quantile(vals[:, j], q)
        out[name] = bool(lo <= flat[name] <= hi)
    return out


# -- files ----------------------------------------------------------------


def write_posterior(ps: PosteriorSet, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["draw_index", "eta", *ps.names])
        for s in ps.samples:
            flat = s.theta.to_flat()
            w.writerow([s.draw_index, repr(s.eta), *(repr(flat[n]) for n in ps.names)])


def read_posterior(path, free_names: Sequence[str] | None = None, budget: int | None = None) -> PosteriorSet:
    """Load a posterior CSV. Columns with a single value are treated as
    pinned unless ``free_names`` says otherwise."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:2] != ["draw_index", "eta"]:
        raise ValueError(f"{path}: not a posterior file")
    names = tuple(header[2:])
    samples = []
    for r in body:
        flat = dict(zip(names, map(float, r[2:])))
        samples.append(PosteriorSample(ModelParams.from_flat(flat), float(r[1]), int(r[0])))
    if free_names is None:
        vals = np.array([[float(v) for v in r[2:]] for r in body])
        free_names = [n for j, n in enumerate(names) if len(np.unique(vals[:, j])) > 1]
    return PosteriorSet(tuple(samples), budget or len(samples), names, tuple(sorted(free_names)))


def data_hash(*paths_or_bytes) -> str:
    h = hashlib.sha256()
    for item in paths_or_bytes:
        h.update(Path(item).read_bytes() if isinstance(item, (str, Path)) else item)
    return h.hexdigest()


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_manifest(path, **fields) -> None:
    fields.setdefault("version", __version__)
    Path(path).write_text(json.dumps(fields, indent=2, sort_keys=True, default=_plain) + "\n", encoding="utf-8")
