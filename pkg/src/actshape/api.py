"""Operations shared by the HTTP service and the command line."""
from __future__ import annotations

import glob
from pathlib import Path
from typing import Optional, Sequence

from .harness.config import ConfigError, ExperimentConfig, config_from_json, load_config, seeds_from_env
from .harness.curves import AGG_HEADER, aggregate_from_csv, compare, curve_from_csv, read_curve
from .harness.plot import emit_plot
from .harness.presets import PRESETS, preset
from .harness.runner import ExperimentResult, run_experiment
from .shaping import FlattenMultiDiscrete
from .spaces import Discrete, cardinality, to_json

MAX_TABLE_ROWS = 4096


def resolve_config(source) -> ExperimentConfig:
    """Accept a parsed config, a JSON dict or a path to a JSON file."""
    if isinstance(source, ExperimentConfig):
        return source
    if isinstance(source, dict):
        return config_from_json(source)
    return load_config(source)


def enumerate_config(config: ExperimentConfig) -> dict:
    stack = config.stack()
    table = None
    shaped = stack.shaped
    if isinstance(shaped, Discrete) and any(isinstance(t, FlattenMultiDiscrete) for t in stack.transforms):
        rows = min(shaped.n, MAX_TABLE_ROWS)
        table = [[i, _jsonable(stack.decode(i))] for i in range(rows)]
    return {
        "name": config.name,
        "original": to_json(stack.original),
        "shaped": to_json(shaped),
        "original_cardinality": cardinality(stack.original),
        "shaped_cardinality": cardinality(shaped),
        "combinations": table,
        "truncated": bool(table is not None and shaped.n > MAX_TABLE_ROWS),
    }


def _jsonable(action):
    if isinstance(action, tuple):
        return [_jsonable(a) for a in action]
    return action


def result_summary(result: ExperimentResult) -> dict:
    curves = [
        {"seed": c.seed, "auc": c.auc, "final_return": c.final_return, "points": len(c.points)} for c in result.curves
    ]
    return {
        "name": result.config.name,
        "curves": curves,
        "aggregate_auc": result.aggregate.auc if result.aggregate is not None else None,
        "failures": {str(k): v for k, v in result.failures.items()},
        "files": [str(p) for p in result.files],
    }


def train_config(config: ExperimentConfig, seed: Optional[int] = None, out_dir=None) -> ExperimentResult:
    seeds = [seed] if seed is not None else None
    return run_experiment(config, out_dir, checkpoints=out_dir is not None, seeds=seeds)


def sweep_configs(target: str, seeds: Optional[Sequence[int]] = None, budget: Optional[int] = None) -> list[ExperimentConfig]:
    """A preset name or a config path. ``ACTSHAPE_SEED`` applies when ``seeds`` is not given."""
    if target in PRESETS:
        if seeds is None:
            seeds = seeds_from_env([]) or None
        return preset(target, seeds=seeds, budget=budget)
    if not Path(target).is_file():
        raise ConfigError(f"{target!r} is neither a preset ({', '.join(PRESETS)}) nor a config file")
    config = resolve_config(target)
    return [config.with_seeds(seeds) if seeds else config]


def sweep(
    configs: Sequence[ExperimentConfig], out_dir, workers: int = 1, plot_name: Optional[str] = None
) -> list[ExperimentResult]:
    results = [run_experiment(c, out_dir, workers=workers) for c in configs]
    done = [r for r in results if r.aggregate is not None]
    if out_dir is not None and done:
        name = plot_name or (configs[0].name if len(configs) == 1 else "sweep")
        emit_plot([r.aggregate for r in done], Path(out_dir) / f"{name}.svg", labels=[r.config.name for r in done], title=name)
    return results


def parse_any_curve(text: str, seed: int = 0):
    """Per-seed curve or cross-seed aggregate, told apart by the header."""
    if text.startswith(",".join(AGG_HEADER)):
        return aggregate_from_csv(text)
    return curve_from_csv(text, seed)


def read_any_curve(path):
    path = Path(path)
    if path.read_text().startswith(",".join(AGG_HEADER)):
        return aggregate_from_csv(path.read_text())
    return read_curve(path)


def plot_files(paths: Sequence, out, title: str = "") -> Path:
    curves = [read_any_curve(p) for p in paths]
    return emit_plot(curves, out, labels=[Path(p).stem for p in paths], title=title)


def compare_files(a_pattern: str, b_pattern: str, metric: str = "auc"):
    a = [read_curve(p) for p in sorted(glob.glob(a_pattern))]
    b = [read_curve(p) for p in sorted(glob.glob(b_pattern))]
    if not a or not b:
        raise ConfigError(f"no curve files match {a_pattern if not a else b_pattern!r}")
    return compare(a, b, metric)
