"""Least-squares regression of site outcomes on Blau coordinates.

Used to pick a sensible value for the pinned field coefficient before
running inference.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .blau_space import Population


class RankError(ValueError):
    pass


@dataclass(frozen=True)
class OLSResult:
    dims: tuple[str, ...]
    coef: np.ndarray
    intercept: float
    residuals: np.ndarray

    def as_dict(self) -> dict[str, float]:
        out = {"intercept": self.intercept}
        out.update(zip(self.dims, self.coef.tolist()))
        return out


def ols(
    pop: Population,
    dims: Sequence[str],
    outcomes: np.ndarray | None = None,
    weighted: bool = False,
) -> OLSResult:
    """Regress ``outcomes`` (default: observed fractions) on the given scalar
    coordinates plus an intercept.

    Sites without an outcome are dropped. With ``weighted=True`` each site is
    weighted by its population.
    """
    dims = tuple(dims)
    unknown = set(dims) - set(pop.schema.dims)
    if unknown:
        raise KeyError(f"unknown dimensions {sorted(unknown)}")
    y = pop.observed if outcomes is None else np.asarray(outcomes, dtype=float)
    cols = [pop.schema.dims.index(d) for d in dims]
    X = np.column_stack([np.ones(pop.C), pop.scalar_coords()[:, cols]])
    ok = ~np.isnan(y)
    X, y = X[ok], y[ok]
    p = X.shape[1]
    if len(y) < p:
        raise RankError(f"{len(y)} sites cannot identify {p} coefficients")
    w = np.sqrt(pop.sizes[ok].astype(float)) if weighted else np.ones(len(y))
    Xw, yw = X * w[:, None], y * w
    beta, _, rank, sv = np.linalg.lstsq(Xw, yw, rcond=None)
    if rank < p or sv[-1] <= 1e-10 * sv[0]:
        raise RankError(f"design matrix is rank deficient (rank {rank} < {p})")
    return OLSResult(dims, beta[1:], float(beta[0]), y - X @ beta)


def write_ols(res: OLSResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dimension", "coefficient"])
        for k, v in res.as_dict().items():
            w.writerow([k, repr(v)])
