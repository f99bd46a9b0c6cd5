"""Logistic connectivity kernel and soft random geometric graph sampling.

Spins at the same site are exchangeable, so instead of N^2 Bernoulli
trials we draw, for each unordered site pair, the number of edges from a
binomial and then place them on distinct spin pairs uniformly at random.
The resulting graph has exactly the law of independent per-pair trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.special import expit

from .blau_space import DistanceTable, Population

EXP_CLAMP = 700.0


@dataclass(frozen=True)
class KernelParams:
    """Bias ``theta0`` plus one coefficient per distance dimension.

    Positive coefficients mean homophily (connection probability decays
    with distance), negative ones heterophily.
    """

    theta0: float
    theta: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "theta", dict(self.theta))
        vals = [self.theta0, *self.theta.values()]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite kernel parameter in {self}")

    def coefficients(self, dims) -> np.ndarray:
        """Coefficients aligned to ``dims``; dimensions not named get 0."""
        unknown = set(self.theta) - set(dims)
        if unknown:
            raise KeyError(f"kernel coefficients for unknown dimensions {sorted(unknown)}")
        return np.array([float(self.theta.get(d, 0.0)) for d in dims])


def kernel_logits(dt: DistanceTable, kp: KernelParams) -> np.ndarray:
    """theta0 + sum_k theta_k d_k for every site pair, clamped to +-700."""
    coef = kp.coefficients(dt.dims)
    z = kp.theta0 + np.tensordot(coef, dt.values, axes=1) if len(coef) else np.full(dt.values.shape[1:], kp.theta0)
    return np.clip(z, -EXP_CLAMP, EXP_CLAMP)


def kernel_matrix(dt: DistanceTable, kp: KernelParams) -> np.ndarray:
    """C x C matrix of connection probabilities rho = 1 / (1 + exp(logit))."""
    return expit(-kernel_logits(dt, kp))


def kernel_prob(dt: DistanceTable, kp: KernelParams, site_i: int, site_j: int) -> float:
    coef = kp.coefficients(dt.dims)
    z = kp.theta0 + float(coef @ dt.values[:, site_i, site_j]) if len(coef) else kp.theta0
    return float(expit(-min(max(z, -EXP_CLAMP), EXP_CLAMP)))


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph over N spins; each edge stored once with i < j."""

    edges: np.ndarray  # (E, 2) int64
    N: int
    offsets: np.ndarray | None = None  # per-site spin ranges, shared with Population

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            e = np.sort(e, axis=1)
            e = e[np.lexsort((e[:, 1], e[:, 0]))]
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) adjacency in compressed sparse row form."""
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.argsort(src, kind="stable")
        indptr = np.zeros(self.N + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.N), out=indptr[1:])
        return indptr, dst[order].astype(np.int64)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.N)

    def validate(self) -> None:
        e = self.edges
        if len(e) == 0:
            return
        if (e[:, 0] == e[:, 1]).any():
            raise ValueError("self-loop in graph")
        if e.min() < 0 or e.max() >= self.N:
            raise ValueError("edge index out of range")
        if (np.diff(e[:, 0] * self.N + e[:, 1]) == 0).any():
            raise ValueError("duplicate edge")


def _distinct_uniform(M: np.ndarray, k: np.ndarray, rng: np.random.Generator):
    """For each block b draw k[b] distinct integers uniformly from [0, M[b]).

    Returns (block index, value) arrays. Sparse blocks draw with replacement
    and redraw collisions (the final set is uniform over k-subsets by
    symmetry of the procedure); dense blocks use an explicit choice.
    """
    blocks = np.flatnonzero(k)
    if len(blocks) == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    dense = blocks[4 * k[blocks] > M[blocks]]
    sparse = blocks[4 * k[blocks] <= M[blocks]]

    out_b, out_t = [], []
    if len(sparse):
        b = np.repeat(sparse, k[sparse])
        t = rng.integers(0, M[b])
        while True:
            order = np.lexsort((t, b))
            bs, ts = b[order], t[order]
            dup = np.zeros(len(bs), bool)
            dup[1:] = (bs[1:] == bs[:-1]) & (ts[1:] == ts[:-1])
            if not dup.any():
                break
            pos = order[dup]
            t[pos] = rng.integers(0, M[b[pos]])
        out_b.append(b)
        out_t.append(t)
    for blk in dense:
        out_b.append(np.full(k[blk], blk, np.int64))
        out_t.append(rng.choice(M[blk], size=k[blk], replace=False).astype(np.int64))
    return np.concatenate(out_b), np.concatenate(out_t)


def _decode_triangle(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map t in [0, n(n-1)/2) to the pair (i, j), i < j, with t = j(j-1)/2 + i."""
    t = np.asarray(t, dtype=np.int64)
    j = ((1 + np.sqrt(1 + 8 * t.astype(float))) // 2).astype(np.int64)
    # float sqrt may be off by one near perfect squares
    j -= (j * (j - 1) // 2 > t)
    j += ((j + 1) * j // 2 <= t)
    i = t - j * (j - 1) // 2
    return i, j


def sample_graph(pop: Population, dt: DistanceTable, kp: KernelParams, rng: np.random.Generator) -> Graph:
    """Draw a soft random geometric graph over the spins of ``pop``."""
    n = pop.sizes
    off = pop.offsets
    rho = kernel_matrix(dt, kp)
    a, b = np.triu_indices(pop.C)
    M = np.where(a == b, n[a] * (n[a] - 1) // 2, n[a] * n[b])
    k = rng.binomial(M, rho[a, b])
    blk, t = _distinct_uniform(M, k, rng)
    pa, pb = a[blk], b[blk]
    within = pa == pb
    i = np.empty(len(t), np.int64)
    j = np.empty(len(t), np.int64)
    wi, wj = _decode_triangle(t[within])
    i[within] = off[pa[within]] + wi
    j[within] = off[pa[within]] + wj
    nb = n[pb[~within]]
    i[~within] = off[pa[~within]] + t[~within] // nb
    j[~within] = off[pb[~within]] + t[~within] % nb
    return Graph(np.column_stack([i, j]), pop.N, off)


def expected_edges(pop: Population, dt: DistanceTable, kp: KernelParams) -> np.ndarray:
    """C x C expected edge counts between (and, on the diagonal, within) sites."""
    n = pop.sizes.astype(float)
    rho = kernel_matrix(dt, kp)
    exp = rho * np.outer(n, n)
    np.fill_diagonal(exp, rho.diagonal() * n * (n - 1) / 2)
    return exp


def rescale_theta0(theta0: float, N_from: int, N_to: int) -> float:
    """Bias that keeps each spin's expected neighbourhood when the population
    is resized from ``N_from`` to ``N_to`` spins (valid for sparse graphs)."""
    if N_from <= 0 or N_to <= 0:
        raise ValueError(f"population sizes must be positive, got {N_from}, {N_to}")
    return theta0 - math.log(N_from / N_to)


def degree_stats(g: Graph) -> dict:
    deg = g.degrees()
    return {
        "mean": 2.0 * g.n_edges / g.N if g.N else 0.0,
        "variance": float(deg.var()) if g.N else 0.0,
        "histogram": np.bincount(deg) if g.N else np.zeros(1, np.int64),
    }


def link_distance_stats(g: Graph, pop: Population, raw_dt: DistanceTable) -> dict:
    """Median raw distance between linked spins, per distance dimension.

    ``spatial_median`` is the median link length in km when the population
    has a spatial block, else ``None``.
    """
    if raw_dt.standardised:
        raise ValueError("link distances need the raw (unstandardised) table")
    if g.n_edges == 0:
        raise ValueError("graph has no edges")
    site = pop.site_of_spin()
    sa, sb = site[g.edges[:, 0]], site[g.edges[:, 1]]
    medians = {d: float(np.median(raw_dt.values[k][sa, sb])) for k, d in enumerate(raw_dt.dims)}
    spatial = medians.get("distance") if pop.schema.spatial else None
    return {"spatial_median": spatial, "medians": medians}


def randomise_links(g: Graph, rng: np.random.Generator) -> Graph:
    """Same number of edges, endpoints redrawn uniformly over all spin pairs.

    Density is preserved, degrees are not.
    """
    M = np.array([g.N * (g.N - 1) // 2], dtype=np.int64)
    if g.n_edges > M[0]:
        raise ValueError("more edges than spin pairs")
    _, t = _distinct_uniform(M, np.array([g.n_edges], dtype=np.int64), rng)
    i, j = _decode_triangle(t)
    return Graph(np.column_stack([i, j]), g.N, g.offsets)


def write_edgelist(g: Graph, path) -> None:
    np.savetxt(Path(path), g.edges, fmt="%d")
