"""Seeded experiment execution and persistence."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from ..ppo import train
from .config import ExperimentConfig, config_from_json
from .curves import Aggregate, LearningCurve, Point, aggregate, aggregate_to_csv, agg_path, atomic_write, write_curve

log = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    curves: list[LearningCurve]
    aggregate: Optional[Aggregate]
    failures: dict = field(default_factory=dict)  # seed -> error message
    files: list[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def by_seed(self) -> dict[int, LearningCurve]:
        return {c.seed: c for c in self.curves}


def run_seed(config: ExperimentConfig, seed: int, checkpoint: Optional[Path] = None, callback: Optional[Callable] = None) -> LearningCurve:
    result = train(config.ppo_config(seed), config.env, config.stack(), callback=callback)
    if checkpoint is not None:
        result.net.save(checkpoint)
    points = [Point(p.env_steps, p.mean_return, p.std_return, p.episodes_completed) for p in result.curve]
    return LearningCurve(seed, points)


def _worker(config_json: dict, seed: int, checkpoint: Optional[str]):
    config = config_from_json(config_json, apply_env_override=False)
    return run_seed(config, seed, Path(checkpoint) if checkpoint else None)


def run_experiment(
    config: ExperimentConfig,
    out_dir=None,
    workers: int = 1,
    checkpoints: bool = False,
    seeds: Optional[Sequence[int]] = None,
) -> ExperimentResult:
    """Train once per seed, persist per-seed CSVs, then the cross-seed aggregate.

    A failing seed does not stop the others; it is reported in ``failures``.
    """
    seeds = list(config.seeds if seeds is None else seeds)
    out = Path(out_dir) if out_dir is not None else None
    curves: dict[int, LearningCurve] = {}
    failures: dict[int, str] = {}
    files: list[Path] = []

    def ckpt(seed):
        if out is None or not checkpoints:
            return None
        return out / "checkpoints" / f"{config.name}_seed{seed}"

    def done(seed, curve):
        curves[seed] = curve
        if out is not None:
            files.append(write_curve(curve, out, config.name))

    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                s: pool.submit(_worker, config.to_json(), s, str(ckpt(s)) if ckpt(s) else None) for s in seeds
            }
            for s, fut in futures.items():
                try:
                    done(s, fut.result())
                except Exception as exc:  # noqa: BLE001 - reported per seed
                    failures[s] = f"{type(exc).__name__}: {exc}"
    else:
        for s in seeds:
            try:
                done(s, run_seed(config, s, ckpt(s)))
            except Exception as exc:  # noqa: BLE001 - reported per seed
                log.error("seed %d failed: %s", s, exc)
                failures[s] = f"{type(exc).__name__}: {exc}"

    ordered = [curves[s] for s in seeds if s in curves]
    agg = aggregate(ordered) if ordered else None
    if out is not None and agg is not None:
        path = agg_path(out, config.name)
        atomic_write(path, aggregate_to_csv(agg))
        files.append(path)
    return ExperimentResult(config, ordered, agg, failures, files)
