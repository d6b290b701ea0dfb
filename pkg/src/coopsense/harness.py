"""Experiments: ROC comparison, GA convergence, GA parameter sweep and the
Monte Carlo validation of the Gaussian model, plus CSV/JSON output.

All randomness derives from ``ExperimentConfig.seed``. Realization ``r``
always uses the same scenario in every experiment, so ``scenario --seed S``
prints exactly the network that ``converge --seed S`` optimizes.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from . import rng as _rng
from .bga import GaConfig, GaRun, run_bga
from .detection import (
    Hypothesis,
    Scenario,
    ScenarioSpec,
    generate_scenario,
    simulate_energies,
    statistics,
)
from .fusion import Scheme, detection_pair, evaluate_scheme, pd_given_pf, scheme_weights, threshold_for_pf

log = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("nbits", "pops", "p_c", "p_m", "prep")

DEFAULT_SWEEP_GRIDS = {
    "nbits": (2, 4, 6, 8, 10),
    "pops": (10, 20, 30, 40, 50),
    "p_c": (0.50, 0.65, 0.75, 0.85, 0.95),
    "p_m": (0.01, 0.1, 0.15, 0.2, 0.3, 0.6, 0.9),
    "prep": (0.5, 0.6, 0.7, 0.8, 0.9),
}

DEFAULT_PF_GRID = (0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)

DEFAULT_SCHEMES = (Scheme.BGA, Scheme.NDC, Scheme.MDC, Scheme.MRC, Scheme.EGC, Scheme.OR_RULE)

ROC_COLUMNS = ("scheme", "pf", "pd_mean", "pd_stderr", "realizations")
CONVERGE_COLUMNS = ("generation", "best_fitness", "mean_fitness")
SWEEP_COLUMNS = ("parameter", "value", "mean_fitness", "stderr", "is_argmax")
VALIDATE_COLUMNS = (
    "scheme", "threshold", "pf_analytic", "pf_empirical", "pd_analytic", "pd_empirical", "trials",
)


class ConfigError(ValueError):
    pass


class RealizationError(RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"realization {index} failed: {cause}")
        self.index = index


@dataclass(frozen=True)
class SweepConfig:
    repetitions: int = 100
    grids: Mapping[str, tuple] = field(default_factory=lambda: dict(DEFAULT_SWEEP_GRIDS))

    def __post_init__(self):
        if int(self.repetitions) != self.repetitions or self.repetitions < 1:
            raise ValueError("sweep repetitions must be a positive integer")
        grids = {}
        for name, values in dict(self.grids).items():
            if name not in SWEEP_PARAMETERS:
                raise ValueError(f"unknown sweep parameter {name!r}; choose from {SWEEP_PARAMETERS}")
            values = tuple(values)
            if not values:
                raise ValueError(f"sweep grid for {name} is empty")
            grids[name] = values
        if not grids:
            raise ValueError("sweep needs at least one parameter grid")
        object.__setattr__(self, "grids", grids)


@dataclass(frozen=True)
class ValidateConfig:
    trials: int = 100_000
    pf_points: tuple = (0.05, 0.25, 0.5, 0.75, 0.95)
    schemes: tuple = (Scheme.NDC, Scheme.EGC)
    shared_signal: bool = False

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("validation trials must be a positive integer")
        object.__setattr__(self, "pf_points", _check_pf_grid(self.pf_points))
        object.__setattr__(self, "schemes", tuple(Scheme(s) for s in self.schemes))
        if Scheme.BGA in self.schemes or Scheme.OR_RULE in self.schemes:
            raise ValueError("validation covers the closed-form SDF schemes only")


def _check_pf_grid(grid):
    grid = tuple(float(p) for p in grid)
    if not grid:
        raise ValueError("pf grid is empty")
    if any(not (0.0 < p < 1.0) for p in grid):
        raise ValueError(f"pf grid values must lie in (0, 1): {grid}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"pf grid must be strictly increasing: {grid}")
    return grid


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    realizations: int = 1000
    pf_grid: tuple = DEFAULT_PF_GRID
    schemes: tuple = DEFAULT_SCHEMES
    ga: GaConfig = field(default_factory=GaConfig)
    seed: int = 0
    out: str = "results"
    fast: bool = False
    reference_pf: float = 0.25
    sweep: SweepConfig = field(default_factory=SweepConfig)
    validate: ValidateConfig = field(default_factory=ValidateConfig)

    def __post_init__(self):
        if int(self.realizations) != self.realizations or self.realizations < 1:
            raise ValueError(f"realizations must be a positive integer, got {self.realizations}")
        object.__setattr__(self, "pf_grid", _check_pf_grid(self.pf_grid))
        schemes = tuple(Scheme(s) for s in self.schemes)
        if not schemes or len(set(schemes)) != len(schemes):
            raise ValueError("schemes must be a non-empty list without duplicates")
        object.__setattr__(self, "schemes", schemes)
        if self.ga.M != self.scenario.M:
            object.__setattr__(self, "ga", dataclasses.replace(self.ga, M=self.scenario.M))
        if not (0.0 < self.reference_pf < 1.0):
            raise ValueError("reference_pf must lie in (0, 1)")

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        data = dict(data)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            scenario = ScenarioSpec(**data.pop("scenario", {}))
            ga = dict(data.pop("ga", {}))
            if "M" in ga and ga["M"] != scenario.M:
                raise ValueError(f"ga.M={ga['M']} disagrees with scenario.M={scenario.M}")
            ga["M"] = scenario.M
            return cls(
                scenario=scenario,
                ga=GaConfig(**ga),
                sweep=SweepConfig(**data.pop("sweep", {})),
                validate=ValidateConfig(**data.pop("validate", {})),
                **data,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))


def _plain(obj):
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return ExperimentConfig.from_dict(data)


def scenario_for(cfg: ExperimentConfig, index: int) -> Scenario:
    return generate_scenario(cfg.scenario, _rng.derive_seed(cfg.seed, _rng.SCENARIO, index))


# --- ROC ---------------------------------------------------------------------


@dataclass(frozen=True)
class RocCurve:
    scheme: Scheme
    pf: np.ndarray
    pd_mean: np.ndarray
    pd_stderr: np.ndarray
    realizations: int

    @property
    def points(self):
        return list(zip(self.pf.tolist(), self.pd_mean.tolist()))

    def rows(self):
        for pf, pd, se in zip(self.pf, self.pd_mean, self.pd_stderr):
            yield {
                "scheme": self.scheme.value,
                "pf": pf,
                "pd_mean": pd,
                "pd_stderr": se,
                "realizations": self.realizations,
            }


def roc_realization(cfg: ExperimentConfig, index: int) -> dict:
    """Pd of every configured scheme at every grid pf for realization ``index``."""
    st = statistics(scenario_for(cfg, index))
    out = {}
    for scheme in cfg.schemes:
        if scheme is Scheme.BGA:
            if cfg.fast:
                seed = _rng.derive_seed(cfg.seed, _rng.GA, index)
                run = run_bga(st, dataclasses.replace(cfg.ga, pf_target=cfg.reference_pf, seed=seed))
                pd = [pd_given_pf(run.best_weights, st, pf) for pf in cfg.pf_grid]
            else:
                pd = []
                for j, pf in enumerate(cfg.pf_grid):
                    seed = _rng.derive_seed(cfg.seed, _rng.GA, index, j)
                    pd.append(run_bga(st, dataclasses.replace(cfg.ga, pf_target=pf, seed=seed)).best_fitness)
        else:
            pd = [evaluate_scheme(scheme, st, pf).pd for pf in cfg.pf_grid]
        out[scheme] = np.asarray(pd, dtype=float)
    return out


def _guarded_realization(args):
    cfg, index = args
    try:
        return roc_realization(cfg, index)
    except Exception as exc:
        raise RealizationError(index, exc) from exc


def run_roc(cfg: ExperimentConfig, workers: int = 1) -> list[RocCurve]:
    """Ensemble-averaged ROC curve per scheme.

    Realizations are independent; with ``workers > 1`` they run in a
    process pool and are reduced in index order, so results do not depend
    on scheduling.
    """
    R = cfg.realizations
    pd = {s: np.empty((R, len(cfg.pf_grid))) for s in cfg.schemes}
    jobs = ((cfg, r) for r in range(R))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_guarded_realization, jobs, chunksize=max(1, R // (4 * workers)))
            for r, res in enumerate(results):
                for s in cfg.schemes:
                    pd[s][r] = res[s]
    else:
        for r, res in enumerate(map(_guarded_realization, jobs)):
            for s in cfg.schemes:
                pd[s][r] = res[s]
            if (r + 1) % 100 == 0:
                log.info("roc: %d/%d realizations", r + 1, R)

    pf = np.asarray(cfg.pf_grid)
    curves = []
    for s in cfg.schemes:
        stderr = pd[s].std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros(len(pf))
        curves.append(RocCurve(s, pf, pd[s].mean(axis=0), stderr, R))
    return curves


# --- convergence -------------------------------------------------------------


def convergence_config(cfg: ExperimentConfig) -> GaConfig:
    return dataclasses.replace(cfg.ga, seed=_rng.derive_seed(cfg.seed, _rng.GA, 0))


def run_convergence(cfg: ExperimentConfig) -> GaRun:
    """One GA run on realization 0 at ``cfg.ga.pf_target``."""
    st = statistics(scenario_for(cfg, 0))
    return run_bga(st, convergence_config(cfg))


def convergence_rows(run: GaRun):
    for t, (best, mean) in enumerate(run.trace, start=1):
        yield {"generation": t, "best_fitness": best, "mean_fitness": mean}


# --- parameter sweep ---------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    parameter: str
    value: float
    mean_fitness: float
    stderr: float
    is_argmax: bool

    def as_dict(self):
        return dataclasses.asdict(self)


def run_param_sweep(cfg: ExperimentConfig, grids: Mapping | None = None, repetitions: int | None = None):
    """One-factor-at-a-time sweep of GA parameters around ``cfg.ga``.

    Repetition ``k`` of every cell uses the same scenario and GA seed, so
    cells differ only in the swept parameter.
    """
    sweep = SweepConfig(
        repetitions=cfg.sweep.repetitions if repetitions is None else repetitions,
        grids=cfg.sweep.grids if grids is None else grids,
    )
    reps = sweep.repetitions
    stats = [statistics(scenario_for(cfg, k)) for k in range(reps)]
    seeds = [_rng.derive_seed(cfg.seed, _rng.SWEEP, k) for k in range(reps)]
    rows = []
    for name in SWEEP_PARAMETERS:
        if name not in sweep.grids:
            continue
        cells = []
        for value in sweep.grids[name]:
            try:
                base = dataclasses.replace(cfg.ga, **{name: value})
            except ValueError as exc:
                raise ConfigError(f"sweep {name}={value}: {exc}") from exc
            final = np.array([
                run_bga(st, dataclasses.replace(base, seed=seed)).best_fitness
                for st, seed in zip(stats, seeds)
            ])
            stderr = final.std(ddof=1) / math.sqrt(reps) if reps > 1 else 0.0
            cells.append((value, float(final.mean()), float(stderr)))
            log.info("sweep %s=%s: mean %.6f", name, value, cells[-1][1])
        best = max(range(len(cells)), key=lambda i: cells[i][1])
        rows.extend(SweepRow(name, v, m, se, i == best) for i, (v, m, se) in enumerate(cells))
    return rows


def sweep_argmax(rows: Iterable[SweepRow]) -> dict:
    return {r.parameter: r.value for r in rows if r.is_argmax}


# --- Monte Carlo validation ----------------------------------------------------


def run_validation(cfg: ExperimentConfig) -> list[dict]:
    """Empirical vs analytic (Pf, Pd) of the fused statistic on realization 0.

    Thresholds are placed where the Gaussian model predicts each value of
    ``cfg.validate.pf_points``.
    """
    v = cfg.validate
    s = scenario_for(cfg, 0)
    st = statistics(s)
    z0 = simulate_energies(s, Hypothesis.H0, v.trials, _rng.derive_seed(cfg.seed, _rng.SIMULATION, 0),
                           shared_signal=v.shared_signal).z
    z1 = simulate_energies(s, Hypothesis.H1, v.trials, _rng.derive_seed(cfg.seed, _rng.SIMULATION, 1),
                           shared_signal=v.shared_signal).z
    rows = []
    for scheme in v.schemes:
        w = scheme_weights(scheme, st)
        f0, f1 = z0 @ w, z1 @ w
        for pf in v.pf_points:
            beta = threshold_for_pf(w, st, pf)
            pf_a, pd_a = detection_pair(w, st, beta)
            rows.append({
                "scheme": scheme.value,
                "threshold": beta,
                "pf_analytic": pf_a,
                "pf_empirical": float(np.mean(f0 > beta)),
                "pd_analytic": pd_a,
                "pd_empirical": float(np.mean(f1 > beta)),
                "trials": v.trials,
            })
    return rows


# --- output -------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def emit_csv(records: Iterable[Mapping], path, columns: Sequence[str]) -> Path:
    """Write ``records`` as UTF-8 CSV with a header row and fixed column order."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for rec in records:
                writer.writerow([_cell(rec[c]) for c in columns])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_metadata(csv_path, cfg: ExperimentConfig, command: str, **extra) -> Path:
    """Sidecar ``<name>.meta.json`` holding everything needed to rerun ``command``."""
    csv_path = Path(csv_path)
    meta = {
        "command": command,
        "seed": cfg.seed,
        "package_version": __version__,
        "config": cfg.to_dict(),
        **_plain(extra),
    }
    path = csv_path.with_suffix(".meta.json")
    try:
        path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path
