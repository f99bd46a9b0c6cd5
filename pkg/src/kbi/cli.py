"""Command-line front end.

Every subcommand reads a JSON config, takes all randomness from ``--seed``
and writes its outputs plus a ``manifest.json`` into ``--out``. A manifest
can be passed back as ``--config`` to rerun the same command.

Exit codes: 0 ok, 2 config error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .abc import (
    DEFAULT_BUDGET,
    DEFAULT_KEEP,
    PriorError,
    PriorSpec,
    coverage_check,
    data_hash,
    gaussian_fit,
    marginal_histograms,
    read_posterior,
    run_abc,
    write_manifest,
    write_posterior,
)
from .blau_space import DataError, DimSchema, Population, load_population, raw_distances, standardise, write_population
from .calibration import RankError, ols, write_ols
from .intervention import Context, run_scenario, scenario_from_json, scenario_to_json, write_outcomes, write_result_json
from .kernel_graph import degree_stats, write_edgelist
from .prediction import DEFAULT_T, ef_only, load_split, null_eta, null_model, predict as run_predict, training_summary
from .rng import SNAPSHOT, SWEEP, task_rng
from .spin_model import (
    DEFAULT_SWEEPS,
    ModelParams,
    Summary,
    load_summary,
    magnetisation_sweep,
    simulate,
    summarise,
    write_summary,
)
from .synth import grid_truth, make_grid
from .tasks import default_workers

EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 2, 3, 4


class ConfigError(ValueError):
    pass


class Config:
    """Config mapping with paths resolved against the config file's folder."""

    def __init__(self, data: dict, base: Path):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        self.data = data
        self.base = base
        self.inputs: dict[str, str] = {}

    def get(self, key, default=None):
        return self.data.get(key, default)

    def require(self, key):
        if key not in self.data:
            raise ConfigError(f"config is missing required field {key!r}")
        return self.data[key]

    def path(self, key, required=True) -> Path | None:
        val = self.data.get(key)
        if val is None:
            if required:
                raise ConfigError(f"config is missing required field {key!r}")
            return None
        if not isinstance(val, str):
            raise ConfigError(f"field {key!r} must be a file path")
        p = Path(val)
        p = p if p.is_absolute() else self.base / p
        if not p.exists():
            raise DataError(f"file for {key!r} not found: {p}")
        self.inputs[key] = data_hash(p)
        return p

    def number(self, key, default, kind=int, minimum=None):
        val = self.data.get(key, default)
        try:
            val = kind(val)
        except (TypeError, ValueError):
            raise ConfigError(f"field {key!r} must be a number, got {val!r}") from None
        if minimum is not None and val < minimum:
            raise ConfigError(f"field {key!r} must be >= {minimum}, got {val}")
        return val


def _load_config(path: Path) -> tuple[Config, str | None, int | None]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    command = seed = None
    if isinstance(data, dict) and "command" in data and "config" in data:  # a manifest
        command, seed, data = data["command"], data.get("seed"), data["config"]
    return Config(data, path.parent.resolve()), command, seed


def _population(cfg: Config) -> Population:
    if "synthetic" in cfg.data:
        syn = cfg.get("synthetic") or {}
        try:
            return make_grid(int(syn.get("side", 10)), int(syn.get("spins_per_cell", 10)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad synthetic population: {exc}") from None
    path = cfg.path("population")
    mult = cfg.get("multipliers") or {}
    schema = None
    if mult:
        with path.open(encoding="utf-8") as fh:
            header = next(csv.reader(fh))
        spatial = "x_km" in header
        dims = tuple(h for h in header if h not in {"id", "n", "S", "group", "x_km", "y_km"})
        schema = DimSchema(dims, spatial, {k: float(v) for k, v in mult.items()})
    return load_population(path, schema)


def _params(cfg: Config, pop: Population, key="params") -> ModelParams:
    flat = cfg.get(key)
    if flat is None and "synthetic" in cfg.data:
        syn = cfg.get("synthetic") or {}
        return grid_truth(float(syn.get("J", 5.0)), int(syn.get("spins_per_cell", 10)), int(syn.get("side", 10)))
    if not isinstance(flat, dict):
        raise ConfigError(f"field {key!r} must be an object of parameter values")
    try:
        mp = ModelParams.from_flat(flat)
        mp.fields.site_fields(pop)
        mp.kernel.coefficients(pop.schema.distance_dims)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid {key!r}: {exc}") from None
    return mp


def _priors(cfg: Config) -> PriorSpec:
    try:
        return PriorSpec.from_json(cfg.require("priors"))
    except PriorError as exc:
        raise ConfigError(f"invalid priors: {exc}") from None


def _observed(cfg: Config, pop: Population) -> Summary:
    path = cfg.path("observed", required=False)
    return load_summary(path, pop) if path else Summary.observed(pop)


def _write_marginals(ps, path: Path, bins: int) -> None:
    hist = marginal_histograms(ps, bins=bins)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "kind", "x", "y"])
        for name, h in hist.items():
            centres = 0.5 * (h["edges"][1:] + h["edges"][:-1])
            for x, y in zip(centres, h["counts"]):
                w.writerow([name, "histogram", repr(float(x)), int(y)])
            if h["kde"] is not None:
                for x, y in zip(h["grid"], h["kde"]):
                    w.writerow([name, "kde", repr(float(x)), repr(float(y))])


# -- commands ---------------------------------------------------------------


def cmd_simulate(cfg: Config, seed: int, workers: int, out: Path) -> dict:
    pop = _population(cfg)
    dt = standardise(raw_distances(pop))
    mp = _params(cfg, pop)
    sweeps = cfg.number("sweeps", DEFAULT_SWEEPS, minimum=1)
    g, sc = simulate(pop, dt, mp, sweeps, task_rng(seed, 0, SNAPSHOT))
    summary = summarise(sc, pop)
    write_population(pop.with_observed(summary.S.tolist()), out / "population.csv")
    write_summary(summary, out / "summary.csv")
    if cfg.get("edges", False):
        write_edgelist(g, out / "edges.txt")
    return {"params": mp.to_flat(), "mean_degree": degree_stats(g)["mean"]}


def cmd_infer(cfg: Config, seed: int, workers: int, out: Path) -> dict:
    pop = _population(cfg)
    dt = standardise(raw_distances(pop))
    priors = _priors(cfg)
    try:
        priors.check_covers(pop)
    except PriorError as exc:
        raise ConfigError(str(exc)) from None
    observed = _observed(cfg, pop)
    split_path = cfg.path("split", required=False)
    if split_path:
        observed = training_summary(pop.with_observed(observed.S.tolist()), load_split(split_path))
    budget = cfg.number("budget", DEFAULT_BUDGET, minimum=1)
    keep = cfg.number("keep", min(DEFAULT_KEEP, budget), minimum=1)
    if keep > budget:
        raise ConfigError(f"keep ({keep}) exceeds budget ({budget})")
    sweeps = cfg.number("sweeps", DEFAULT_SWEEPS, minimum=1)
    ps = run_abc(pop, dt, priors, observed, budget, keep, sweeps, seed, workers)
    write_posterior(ps, out / "posterior.csv")
    _write_marginals(ps, out / "marginals.csv", cfg.number("bins", 30, minimum=1))
    info = {"eta_min": float(ps.etas[0]), "eta_max_kept": float(ps.etas[-1])}
    if ps.keep >= 2 and ps.free_names:
        gp = gaussian_fit(ps)
        (out / "gaussian.json").write_text(
            json.dumps({"names": list(gp.names), "mean": gp.mean.tolist(), "cov": gp.cov.tolist(), "pinned": gp.pinned}, indent=2) + "\n",
            encoding="utf-8",
        )
    if "truth" in cfg.data:
        info["coverage"] = coverage_check(ps, _params(cfg, pop, "truth"), float(cfg.get("level", 0.9)))
    return info


def _posterior_from(cfg: Config, pop, dt, seed, workers, priors_key="priors"):
    path = cfg.path("posterior", required=False)
    if path:
        return read_posterior(path)
    priors = _priors(cfg)
    if cfg.get("ef_only", False):
        priors = ef_only(priors)
    try:
        priors.check_covers(pop)
    except PriorError as exc:
        raise ConfigError(str(exc)) from None
    split = load_split(cfg.path("split"))
    observed = training_summary(pop, split)
    budget = cfg.number("budget", DEFAULT_BUDGET, minimum=1)
    keep = cfg.number("keep", min(DEFAULT_KEEP, budget), minimum=1)
    return run_abc(pop, dt, priors, observed, budget, keep, cfg.number("sweeps", DEFAULT_SWEEPS, minimum=1), seed, workers)


def cmd_predict(cfg: Config, seed: int, workers: int, out: Path) -> dict:
    pop = _population(cfg)
    dt = standardise(raw_distances(pop))
    split = load_split(cfg.path("split"))
    split.validate(pop)
    ps = _posterior_from(cfg, pop, dt, seed, workers)
    T = cfg.number("T", min(DEFAULT_T, ps.keep), minimum=1)
    if T > ps.keep:
        raise ConfigError(f"T ({T}) exceeds the {ps.keep} posterior samples")
    res = run_predict(
        pop, dt, ps, split, T, cfg.number("reps", 1, minimum=1), cfg.number("sweeps", DEFAULT_SWEEPS, minimum=1), seed, workers
    )
    with (out / "predictions.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit_id", "S_pred_mean", "S_pred_std", "S_true"])
        for u, m, s, t in zip(res.units, res.mean, res.std, res.truth):
            w.writerow([u, repr(float(m)), repr(float(s)), "" if np.isnan(t) else repr(float(t))])
    info = {"T": T, "mean_test_eta": res.mean_eta, "null_prediction": null_model(pop, split)}
    if not np.isnan(res.truth).any():
        info["null_test_eta"] = null_eta(pop, split)
    (out / "prediction.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return info


def cmd_intervene(cfg: Config, seed: int, workers: int, out: Path) -> dict:
    pop = _population(cfg)
    ctx = Context.from_population(pop)
    if cfg.get("posterior") is not None:
        posterior = gaussian_fit(read_posterior(cfg.path("posterior")))
    else:
        posterior = _params(cfg, pop)
    raw = cfg.require("scenario")
    try:
        scenario = scenario_from_json(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None
    res = run_scenario(
        ctx, scenario, posterior, cfg.number("reps", 100, minimum=1), seed,
        cfg.number("sweeps", DEFAULT_SWEEPS, minimum=1), workers,
    )
    write_outcomes(res, out / "outcomes.csv")
    write_result_json(res, out / "summary.json", scenario)
    hist = res.histogram(cfg.number("bins", 20, minimum=1))
    with (out / "histogram.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "density_base", "density_scenario"])
        for a, b, x, y in zip(hist["edges"][:-1], hist["edges"][1:], hist["base"], hist["scenario"]):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(x)), repr(float(y))])
    return {**res.summary(), "scenario": scenario_to_json(scenario)}


def cmd_calibrate(cfg: Config, seed: int, workers: int, out: Path) -> dict:
    pop = _population(cfg)
    dims = cfg.get("dims", list(pop.schema.dims))
    if not isinstance(dims, list) or not dims:
        raise ConfigError("field 'dims' must be a non-empty list of dimension names")
    try:
        res = ols(pop, dims, weighted=bool(cfg.get("weighted", False)))
    except KeyError as exc:
        raise ConfigError(f"invalid dims: {exc}") from None
    write_ols(res, out / "ols.csv")
    return res.as_dict()


def cmd_sweep(cfg: Config, seed: int, workers: int, out: Path) -> dict:
    pop = _population(cfg)
    dt = standardise(raw_distances(pop))
    mp = _params(cfg, pop)
    grid = cfg.get("beta_grid", np.linspace(0, 1, 11).tolist())
    try:
        grid = [float(b) for b in grid]
    except (TypeError, ValueError):
        raise ConfigError("field 'beta_grid' must be a list of numbers") from None
    if not grid or min(grid) < 0:
        raise ConfigError("field 'beta_grid' must be a non-empty list of non-negative values")
    curve = magnetisation_sweep(
        pop, dt, mp, grid, cfg.number("reps", 10, minimum=1), task_rng(seed, 0, SWEEP), cfg.number("sweeps", 500, minimum=1)
    )
    with (out / "magnetisation.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "mean_abs_m", "std_abs_m"])
        for row in curve:
            w.writerow([repr(float(v)) for v in row])
    return {"points": len(grid)}


COMMANDS = {
    "simulate": cmd_simulate,
    "infer": cmd_infer,
    "predict": cmd_predict,
    "intervene": cmd_intervene,
    "calibrate": cmd_calibrate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kbi", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", type=Path, default=Path("."))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, manifest_cmd, manifest_seed = _load_config(args.config)
        if manifest_cmd is not None and manifest_cmd != args.command:
            raise ConfigError(f"manifest is for {manifest_cmd!r}, not {args.command!r}")
        seed = args.seed if args.seed is not None else manifest_seed if manifest_seed is not None else cfg.get("seed", 0)
        if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        workers = args.workers if args.workers is not None else int(cfg.get("workers", default_workers()))
        if workers < 1:
            raise ConfigError("workers must be >= 1")
        args.out.mkdir(parents=True, exist_ok=True)
        info = COMMANDS[args.command](cfg, seed, workers, args.out)
        write_manifest(
            args.out / "manifest.json",
            command=args.command, seed=seed, config=cfg.data, inputs=cfg.inputs, result=info,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, RankError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
