"""Ising behaviour model on a sampled graph.

Energy convention: H = -sum_i f_i s_i - J sum_{edges} s_i s_j with each
undirected edge counted once and f_i = h0 + sum_k h_k z_ik computed from the
site's scalar coordinates. Summaries report the fraction of *down* spins.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from ._glauber import glauber_chain_codes, glauber_sweeps
from .blau_space import DataError, DistanceTable, Population
from .kernel_graph import Graph, KernelParams, sample_graph

EXACT_MAX_N = 20
DEFAULT_SWEEPS = 2000


@dataclass(frozen=True)
class FieldParams:
    h: Mapping[str, float] = field(default_factory=dict)
    h0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "h", dict(self.h))
        if not all(math.isfinite(v) for v in [self.h0, *self.h.values()]):
            raise ValueError("non-finite field coefficient")

    def site_fields(self, pop: Population) -> np.ndarray:
        """Field felt by a spin at each site (length C)."""
        dims = pop.schema.dims
        unknown = set(self.h) - set(dims)
        if unknown:
            raise KeyError(f"field coefficients for unknown dimensions {sorted(unknown)}")
        coef = np.array([float(self.h.get(d, 0.0)) for d in dims])
        return self.h0 + pop.scalar_coords() @ coef


@dataclass(frozen=True)
class ModelParams:
    beta: float
    J: float
    fields: FieldParams
    kernel: KernelParams

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")

    def to_flat(self) -> dict[str, float]:
        """Flat ``name -> value`` view: beta, J, h0, h_<dim>, theta0, theta_<dim>."""
        flat = {"beta": self.beta, "J": self.J, "h0": self.fields.h0}
        flat.update({f"h_{d}": v for d, v in self.fields.h.items()})
        flat["theta0"] = self.kernel.theta0
        flat.update({f"theta_{d}": v for d, v in self.kernel.theta.items()})
        return {k: float(v) for k, v in flat.items()}

    @classmethod
    def from_flat(cls, flat: Mapping[str, float]) -> "ModelParams":
        h = {k[2:]: float(v) for k, v in flat.items() if k.startswith("h_")}
        theta = {k[6:]: float(v) for k, v in flat.items() if k.startswith("theta_")}
        known = {"beta", "J", "h0", "theta0"}
        bad = [k for k in flat if k not in known and not k.startswith(("h_", "theta_"))]
        if bad:
            raise KeyError(f"unknown parameter names {bad}")
        return cls(
            beta=float(flat["beta"]),
            J=float(flat["J"]),
            fields=FieldParams(h, float(flat.get("h0", 0.0))),
            kernel=KernelParams(float(flat["theta0"]), theta),
        )

    def replace(self, **flat_updates) -> "ModelParams":
        flat = self.to_flat()
        flat.update(flat_updates)
        return ModelParams.from_flat(flat)


def parameter_names(pop: Population, include_h0: bool = True) -> list[str]:
    """Every flat parameter name a model over ``pop`` carries."""
    names = ["beta", "J"] + (["h0"] if include_h0 else [])
    names += [f"h_{d}" for d in pop.schema.dims]
    names += ["theta0"] + [f"theta_{d}" for d in pop.schema.distance_dims]
    return names


@dataclass(eq=False)
class SpinConfig:
    spins: np.ndarray  # int8, +-1, length N
    offsets: np.ndarray

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8)
        if not np.all(np.abs(self.spins) == 1):
            raise ValueError("spins must be +-1")


@dataclass(frozen=True, eq=False)
class Summary:
    """Per-site fraction of down spins, with site weights and optional groups."""

    ids: tuple[str, ...]
    n: np.ndarray
    S: np.ndarray
    groups: tuple[str | None, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "n", np.asarray(self.n, dtype=np.int64))
        object.__setattr__(self, "S", np.asarray(self.S, dtype=float))
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(self.groups))
        if not (len(self.ids) == len(self.n) == len(self.S)):
            raise ValueError("summary fields have different lengths")

    @classmethod
    def observed(cls, pop: Population) -> "Summary":
        """Observed outcomes of ``pop`` (NaN where missing)."""
        return cls(pop.ids, pop.sizes, pop.observed, tuple(pop.groups))

    def units(self) -> tuple[list[str], np.ndarray, np.ndarray]:
        """Collapse grouped sites into one unit per group.

        Returns unit ids, unit weights and population-weighted unit
        fractions. Sites with NaN outcomes make their whole unit NaN.
        """
        if self.groups is None or all(g is None for g in self.groups):
            return list(self.ids), self.n.astype(float), self.S.copy()
        unit_ids: list[str] = []
        index: dict[str, int] = {}
        member = np.empty(len(self.ids), np.int64)
        for c, (sid, g) in enumerate(zip(self.ids, self.groups)):
            key = sid if g is None else g
            if key not in index:
                index[key] = len(unit_ids)
                unit_ids.append(key)
            member[c] = index[key]
        w = np.bincount(member, weights=self.n, minlength=len(unit_ids)).astype(float)
        S = np.bincount(member, weights=self.n * self.S, minlength=len(unit_ids)) / w
        return unit_ids, w, S


def site_field_vector(pop: Population, fp: FieldParams) -> np.ndarray:
    return np.repeat(fp.site_fields(pop), pop.sizes)


def hamiltonian(sc: SpinConfig, pop: Population, g: Graph, fp: FieldParams, J: float) -> float:
    s = sc.spins.astype(float)
    f = site_field_vector(pop, fp)
    pair = float(np.sum(s[g.edges[:, 0]] * s[g.edges[:, 1]])) if g.n_edges else 0.0
    return float(-(f @ s) - J * pair)


def _field_init(f: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    s = np.sign(f).astype(np.int8)
    ties = s == 0
    s[ties] = rng.choice(np.array([-1, 1], np.int8), size=int(ties.sum()))
    return s


def initial_spins(pop: Population, fp: FieldParams, rng: np.random.Generator, init="field") -> np.ndarray:
    """Starting configuration: ``"field"`` aligns each spin with its local
    field (ties at random), ``"random"`` is uniform, or pass an array."""
    if isinstance(init, str):
        if init == "field":
            return _field_init(site_field_vector(pop, fp), rng)
        if init == "random":
            return rng.choice(np.array([-1, 1], np.int8), size=pop.N)
        raise ValueError(f"unknown init {init!r}")
    s = np.array(init, dtype=np.int8)
    if s.shape != (pop.N,):
        raise ValueError("initial configuration has the wrong length")
    return s


def glauber_sample(
    pop: Population,
    g: Graph,
    mp: ModelParams,
    sweeps: int,
    rng: np.random.Generator,
    init="field",
    pinned: np.ndarray | None = None,
) -> SpinConfig:
    """Run ``sweeps`` random-order Glauber sweeps and return the final state.

    Each update flips spin i with probability 1 / (1 + exp(beta * dH)).
    ``pinned`` is an optional boolean mask of spins that keep their initial
    value throughout.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    f = site_field_vector(pop, mp.fields)
    spins = initial_spins(pop, mp.fields, rng, init)
    free = np.arange(pop.N, dtype=np.int64)
    if pinned is not None:
        free = np.flatnonzero(~np.asarray(pinned, bool)).astype(np.int64)
    indptr, indices = g.csr
    seed = int(rng.integers(0, 2**32 - 1))
    glauber_sweeps(spins, free, indptr, indices, f, float(mp.beta), float(mp.J), int(sweeps), seed)
    return SpinConfig(spins, pop.offsets)


def glauber_chain(
    pop: Population,
    g: Graph,
    mp: ModelParams,
    n_samples: int,
    rng: np.random.Generator,
    thin: int = 10,
    burn: int = 1000,
    init="random",
) -> np.ndarray:
    """Codes of ``n_samples`` thinned states from one long chain (N <= 62).

    Bit i of a code is set when spin i is +1, matching :func:`exact_boltzmann`.
    """
    if pop.N > 62:
        raise ValueError("state codes only available for N <= 62")
    f = site_field_vector(pop, mp.fields)
    spins = initial_spins(pop, mp.fields, rng, init)
    indptr, indices = g.csr
    seed = int(rng.integers(0, 2**32 - 1))
    return glauber_chain_codes(spins, indptr, indices, f, float(mp.beta), float(mp.J), burn, n_samples, thin, seed)


def state_spins(N: int) -> np.ndarray:
    """(2^N, N) matrix of all configurations; row c has s_i = +1 iff bit i of c is set."""
    codes = np.arange(2 ** N, dtype=np.int64)
    return (((codes[:, None] >> np.arange(N)) & 1) * 2 - 1).astype(np.int8)


def exact_boltzmann(pop: Population, g: Graph, mp: ModelParams) -> tuple[np.ndarray, float]:
    """Boltzmann probabilities of all 2^N states by enumeration, and log Z.

    Indexing follows :func:`state_spins`.
    """
    N = pop.N
    if N > EXACT_MAX_N:
        raise ValueError(f"exact enumeration limited to N <= {EXACT_MAX_N}, got {N}")
    S = state_spins(N).astype(float)
    f = site_field_vector(pop, mp.fields)
    H = -(S @ f)
    if g.n_edges:
        H -= mp.J * np.sum(S[:, g.edges[:, 0]] * S[:, g.edges[:, 1]], axis=1)
    logw = -mp.beta * H
    logZ = float(logsumexp(logw))
    return np.exp(logw - logZ), logZ


def summarise(sc: SpinConfig, pop: Population) -> Summary:
    down = (sc.spins < 0).astype(np.int64)
    counts = np.add.reduceat(down, pop.offsets[:-1]) if pop.N else np.zeros(pop.C)
    return Summary(pop.ids, pop.sizes, counts / pop.sizes, tuple(pop.groups))


def eta(a: Summary, b: Summary) -> float:
    """Population-weighted mean absolute difference of two summaries.

    Grouped sites are first merged to group fractions (using ``a``'s
    grouping). Units that are NaN in either summary are left out, so a
    partially observed summary compares only on its observed units.
    """
    if a.ids != b.ids or not np.array_equal(a.n, b.n):
        raise ValueError("summaries cover different sites")
    b = Summary(b.ids, b.n, b.S, a.groups)
    _, w, Sa = a.units()
    _, _, Sb = b.units()
    ok = ~(np.isnan(Sa) | np.isnan(Sb))
    if not ok.any():
        raise ValueError("no unit is observed in both summaries")
    return float(np.sum(w[ok] * np.abs(Sa[ok] - Sb[ok])) / np.sum(w[ok]))


def magnetisation(sc: SpinConfig) -> float:
    return float(np.mean(sc.spins))


def unaligned_fraction(sc: SpinConfig, g: Graph) -> float:
    """Share of edges joining opposite spins (0 once J is past alignment)."""
    if g.n_edges == 0:
        return 0.0
    s = sc.spins
    return float(np.mean(s[g.edges[:, 0]] != s[g.edges[:, 1]]))


def simulate(
    pop: Population,
    dt: DistanceTable,
    mp: ModelParams,
    sweeps: int,
    rng: np.random.Generator,
    init="field",
) -> tuple[Graph, SpinConfig]:
    """One graph draw followed by one Glauber run. With J = 0 the graph
    cannot affect the spins and sampling it is skipped."""
    if mp.J == 0:
        g = Graph(np.zeros((0, 2), np.int64), pop.N, pop.offsets)
    else:
        g = sample_graph(pop, dt, mp.kernel, rng)
    return g, glauber_sample(pop, g, mp, sweeps, rng, init)


def magnetisation_sweep(
    pop: Population,
    dt: DistanceTable,
    mp: ModelParams,
    beta_grid: Sequence[float],
    reps: int,
    rng: np.random.Generator,
    sweeps: int = 500,
) -> np.ndarray:
    """Average |m| over ``reps`` fresh (graph, spins) draws for each beta.

    Returns an array of rows (beta, mean |m|, std |m|).
    """
    if len(beta_grid) == 0:
        raise ValueError("empty beta grid")
    rows = []
    for b in beta_grid:
        m = [abs(magnetisation(simulate(pop, dt, replace(mp, beta=float(b)), sweeps, rng)[1])) for _ in range(reps)]
        rows.append((float(b), float(np.mean(m)), float(np.std(m))))
    return np.array(rows)


def write_summary(summary: Summary, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["site_id", "n", "S"])
        for sid, n, s in zip(summary.ids, summary.n, summary.S):
            w.writerow([sid, int(n), "" if np.isnan(s) else repr(float(s))])


def load_summary(path, pop: Population | None = None) -> Summary:
    """Read a ``site_id,n,S`` CSV; when ``pop`` is given, reorder to its
    sites and check the populations match."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"site_id", "n", "S"}:
        raise DataError(f"{path}: expected header site_id,n,S")
    try:
        recs = {r["site_id"]: (int(r["n"]), float(r["S"]) if r["S"].strip() else np.nan) for r in rows}
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if pop is None:
        ids = [r["site_id"] for r in rows]
        return Summary(ids, [recs[i][0] for i in ids], [recs[i][1] for i in ids])
    missing = set(pop.ids) - set(recs)
    if missing:
        raise DataError(f"{path}: no rows for sites {sorted(missing)[:5]}")
    for sid, n in zip(pop.ids, pop.sizes):
        if recs[sid][0] != n:
            raise DataError(f"{path}: site {sid!r} has n={recs[sid][0]}, population says {n}")
    return Summary(pop.ids, pop.sizes, [recs[i][1] for i in pop.ids], tuple(pop.groups))
