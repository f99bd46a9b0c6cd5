"""Populations embedded in Blau space: sites, ingestion and pairwise distances.

A site is a populated coordinate (a ward, or a grid cell in synthetic
experiments). Every spin at a site shares the site's coordinates, so all
distance work happens at site resolution (C x C) rather than per spin.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

# Name of the collapsed Euclidean dimension built from the (x_km, y_km) pair.
SPATIAL_DIM = "distance"
SPATIAL_COLUMNS = ("x_km", "y_km")
_RESERVED = {"id", "n", "S", "group", *SPATIAL_COLUMNS}


class DataError(ValueError):
    """Raised for malformed or invariant-violating population data."""


@dataclass(frozen=True)
class DimSchema:
    """Named Blau dimensions of a population.

    ``dims`` are the scalar coordinates, ``spatial`` marks the presence of the
    (x_km, y_km) block. ``multipliers`` pre-scale scalar coordinates at
    ingestion time (default 1 for every dimension).
    """

    dims: tuple[str, ...]
    spatial: bool = False
    multipliers: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        if len(set(self.dims)) != len(self.dims):
            raise DataError(f"duplicate dimension names in {self.dims}")
        clash = _RESERVED.intersection(self.dims) | ({SPATIAL_DIM} & set(self.dims))
        if clash:
            raise DataError(f"reserved column name(s) used as dimensions: {sorted(clash)}")
        unknown = set(self.multipliers) - set(self.dims)
        if unknown:
            raise DataError(f"multipliers given for unknown dimensions: {sorted(unknown)}")

    @property
    def n_coords(self) -> int:
        return len(self.dims) + (2 if self.spatial else 0)

    @property
    def distance_dims(self) -> tuple[str, ...]:
        """Dimensions of the distance table (spatial block collapsed to one)."""
        return self.dims + ((SPATIAL_DIM,) if self.spatial else ())

    def multiplier(self, dim: str) -> float:
        return float(self.multipliers.get(dim, 1.0))


@dataclass(frozen=True)
class Site:
    id: str
    coords: tuple[float, ...]
    n: int
    observed: float | None = None
    group: str | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DataError(f"site {self.id!r}: population must be a positive integer, got {self.n}")
        if self.observed is not None and not 0.0 <= self.observed <= 1.0:
            raise DataError(f"site {self.id!r}: observed fraction {self.observed} outside [0, 1]")
        if not all(math.isfinite(c) for c in self.coords):
            raise DataError(f"site {self.id!r}: non-finite coordinate")


@dataclass(frozen=True, eq=False)
class Population:
    """Ordered sites plus their dimension schema.

    Spins are laid out contiguously by site: site ``c`` owns spin indices
    ``offsets[c]:offsets[c + 1]``.
    """

    sites: tuple[Site, ...]
    schema: DimSchema

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        if not self.sites:
            raise DataError("population has no sites")
        ids = [s.id for s in self.sites]
        if len(set(ids)) != len(ids):
            seen, dup = set(), None
            for i in ids:
                if i in seen:
                    dup = i
                    break
                seen.add(i)
            raise DataError(f"duplicate site id {dup!r}")
        for s in self.sites:
            if len(s.coords) != self.schema.n_coords:
                raise DataError(
                    f"site {s.id!r}: {len(s.coords)} coordinates, schema expects {self.schema.n_coords}"
                )

    @property
    def C(self) -> int:
        return len(self.sites)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([s.n for s in self.sites], dtype=np.int64)

    @property
    def N(self) -> int:
        return int(self.sizes.sum())

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.sites]

    @property
    def groups(self) -> list[str | None]:
        return [s.group for s in self.sites]

    @property
    def observed(self) -> np.ndarray:
        """Observed fractions, NaN where missing."""
        return np.array([np.nan if s.observed is None else s.observed for s in self.sites])

    @property
    def coords(self) -> np.ndarray:
        """(C, n_coords) coordinate matrix; spatial pair, if any, in the last two columns."""
        return np.array([s.coords for s in self.sites], dtype=float)

    def scalar_coords(self) -> np.ndarray:
        """(C, len(dims)) scalar coordinates used by the external fields."""
        return self.coords[:, : len(self.schema.dims)]

    def site_of_spin(self) -> np.ndarray:
        return np.repeat(np.arange(self.C), self.sizes)

    def index(self, site_id: str) -> int:
        for c, s in enumerate(self.sites):
            if s.id == site_id:
                return c
        raise KeyError(site_id)

    def with_coords(self, coords: np.ndarray) -> "Population":
        sites = tuple(replace(s, coords=tuple(float(v) for v in row)) for s, row in zip(self.sites, coords))
        return Population(sites, self.schema)

    def with_observed(self, observed: Sequence[float | None]) -> "Population":
        vals = [None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v) for v in observed]
        return Population(tuple(replace(s, observed=v) for s, v in zip(self.sites, vals)), self.schema)


def _parse_float(text: str, what: str, row: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"row {row}: cannot parse {what} value {text!r}") from None


def load_population(path, schema: DimSchema | None = None) -> Population:
    """Read a population CSV.

    The header is ``id,<dim1>,...,<dimK>[,x_km,y_km],n,S[,group]``. An empty
    ``S`` cell marks a site whose outcome is unobserved. When ``schema`` is
    omitted it is inferred from the header; when given, the header must match
    it and its multipliers are applied to the scalar coordinates.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for col in ("id", "n", "S"):
            if col not in header:
                raise DataError(f"{path}: header lacks required column {col!r}")
        has_xy = [c in header for c in SPATIAL_COLUMNS]
        if any(has_xy) and not all(has_xy):
            raise DataError(f"{path}: spatial block needs both x_km and y_km")
        dims = tuple(h for h in header if h not in _RESERVED)
        if schema is None:
            schema = DimSchema(dims, spatial=all(has_xy))
        elif schema.dims != dims or schema.spatial != all(has_xy):
            raise DataError(f"{path}: header {header} does not match schema {schema.dims} (spatial={schema.spatial})")
        col = {h: i for i, h in enumerate(header)}
        coord_cols = list(schema.dims) + (list(SPATIAL_COLUMNS) if schema.spatial else [])
        scale = [schema.multiplier(d) for d in schema.dims] + ([1.0, 1.0] if schema.spatial else [])

        sites = []
        for r, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(f"row {r}: expected {len(header)} fields, got {len(row)}")
            coords = tuple(_parse_float(row[col[c]], c, r) * m for c, m in zip(coord_cols, scale))
            n = _parse_float(row[col["n"]], "n", r)
            if n != int(n) or n < 1:
                raise DataError(f"row {r}: population n must be a positive integer, got {row[col['n']]!r}")
            s_text = row[col["S"]].strip()
            observed = None if s_text == "" else _parse_float(s_text, "S", r)
            group = row[col["group"]].strip() or None if "group" in col else None
            try:
                sites.append(Site(row[col["id"]].strip(), coords, int(n), observed, group))
            except DataError as exc:
                raise DataError(f"row {r}: {exc}") from None
    return Population(tuple(sites), schema)


def write_population(pop: Population, path) -> None:
    """Write ``pop`` in the ingestion format (multipliers are not undone)."""
    header = ["id", *pop.schema.dims]
    if pop.schema.spatial:
        header += list(SPATIAL_COLUMNS)
    header += ["n", "S"]
    has_group = any(g is not None for g in pop.groups)
    if has_group:
        header.append("group")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for s in pop.sites:
            row = [s.id, *(repr(float(c)) for c in s.coords), s.n, "" if s.observed is None else repr(float(s.observed))]
            if has_group:
                row.append(s.group or "")
            w.writerow(row)


@dataclass(frozen=True, eq=False)
class DistanceTable:
    """Per-dimension C x C site distances.

    ``mean``/``std`` hold the off-diagonal statistics used for
    standardisation; both are ``None`` on a raw table.
    """

    dims: tuple[str, ...]
    values: np.ndarray  # (K, C, C)
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @property
    def standardised(self) -> bool:
        return self.mean is not None

    def __getitem__(self, dim: str) -> np.ndarray:
        return self.values[self.dims.index(dim)]


def raw_distances(pop: Population) -> DistanceTable:
    coords = pop.coords
    k = len(pop.schema.dims)
    mats = [np.abs(coords[:, j, None] - coords[None, :, j]) for j in range(k)]
    if pop.schema.spatial:
        xy = coords[:, k:k + 2]
        diff = xy[:, None, :] - xy[None, :, :]
        mats.append(np.sqrt((diff ** 2).sum(-1)))
    values = np.stack(mats) if mats else np.zeros((0, pop.C, pop.C))
    values.setflags(write=False)
    return DistanceTable(pop.schema.distance_dims, values)


def _offdiag(C: int) -> np.ndarray:
    return ~np.eye(C, dtype=bool)


def standardise(dt: DistanceTable) -> DistanceTable:
    """Shift each dimension to zero mean and scale it to std 0.5.

    Statistics come from off-diagonal entries only; the diagonal (self
    distance 0 before any prior standardisation) goes through the same
    affine map, so standardised distances can be negative.
    """
    C = dt.values.shape[1]
    if C < 2:
        raise DataError("standardisation needs at least two sites")
    mask = _offdiag(C)
    mean = np.empty(len(dt.dims))
    std = np.empty(len(dt.dims))
    for k, d in enumerate(dt.dims):
        off = dt.values[k][mask]
        mean[k] = off.mean()
        std[k] = off.std()
        if not std[k] > 0 or std[k] < 1e-12 * max(1.0, abs(mean[k])):
            raise DataError(f"dimension {d!r} has zero off-diagonal variance; cannot standardise")
    return apply_standardisation(dt, mean, std)


def apply_standardisation(dt: DistanceTable, mean, std) -> DistanceTable:
    """Apply a fixed (mean, std) map to a table; used to keep a baseline's
    scaling after coordinates change."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    values = (dt.values - mean[:, None, None]) / (2.0 * std[:, None, None])
    values.setflags(write=False)
    return DistanceTable(dt.dims, values, mean.copy(), std.copy())


def site_distances(pop: Population) -> DistanceTable:
    """Standardised distance table for ``pop`` (the form the kernel consumes)."""
    return standardise(raw_distances(pop))
