"""Learning curves, CSV persistence, aggregation and comparison."""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CURVE_HEADER = ("env_steps", "mean_return", "std_return", "episodes_completed")
AGG_HEADER = ("env_steps", "mean", "std")


class EmptyInput(ValueError):
    pass


class IncomparableBudgets(ValueError):
    pass


@dataclass(frozen=True)
class Point:
    env_steps: int
    mean_return: float
    std_return: float
    episodes_completed: int


@dataclass
class LearningCurve:
    seed: int
    points: list[Point] = field(default_factory=list)

    def __post_init__(self):
        steps = [p.env_steps for p in self.points]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ValueError("env_steps must be strictly increasing")

    @property
    def steps(self) -> np.ndarray:
        return np.array([p.env_steps for p in self.points], dtype=np.float64)

    @property
    def returns(self) -> np.ndarray:
        return np.array([p.mean_return for p in self.points], dtype=np.float64)

    @property
    def auc(self) -> float:
        return auc(self.steps, self.returns)

    @property
    def final_return(self) -> float:
        return self.points[-1].mean_return if self.points else 0.0


def auc(steps, values) -> float:
    """Trapezoidal area under ``values`` over ``steps``, divided by the step span.

    A single point (or a constant curve) yields its value.
    """
    steps = np.asarray(steps, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInput("curve has no points")
    if values.size == 1:
        return float(values[0])
    span = steps[-1] - steps[0]
    area = float(np.sum((values[1:] + values[:-1]) * np.diff(steps)) / 2.0)
    return area / span


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def curve_to_csv(curve: LearningCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for p in curve.points:
        w.writerow([p.env_steps, _fmt(p.mean_return), _fmt(p.std_return), p.episodes_completed])
    return buf.getvalue()


def curve_from_csv(text: str, seed: int = 0) -> LearningCurve:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CURVE_HEADER:
        raise ValueError(f"expected header {','.join(CURVE_HEADER)}")
    points = [Point(int(r[0]), float(r[1]), float(r[2]), int(r[3])) for r in rows[1:] if r]
    return LearningCurve(seed, points)


def curve_path(out_dir, name: str, seed: int) -> Path:
    return Path(out_dir) / f"{name}_seed{seed}.csv"


def agg_path(out_dir, name: str) -> Path:
    return Path(out_dir) / f"{name}_agg.csv"


def write_curve(curve: LearningCurve, out_dir, name: str) -> Path:
    path = curve_path(out_dir, name, curve.seed)
    atomic_write(path, curve_to_csv(curve))
    return path


def read_curve(path) -> LearningCurve:
    path = Path(path)
    seed = 0
    stem = path.stem
    if "_seed" in stem:
        try:
            seed = int(stem.rsplit("_seed", 1)[1])
        except ValueError:
            pass
    return curve_from_csv(path.read_text(), seed)


@dataclass
class Aggregate:
    env_steps: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    @property
    def auc(self) -> float:
        return auc(self.env_steps, self.mean)


def aggregate(curves: Sequence[LearningCurve]) -> Aggregate:
    """Pointwise mean/std across seeds at the env-step counts all curves share."""
    if not curves:
        raise EmptyInput("no curves to aggregate")
    shared = set(curves[0].steps.tolist())
    for c in curves[1:]:
        shared &= set(c.steps.tolist())
    steps = np.array(sorted(shared))
    table = np.array([[dict(zip(c.steps.tolist(), c.returns.tolist()))[s] for s in steps] for c in curves])
    return Aggregate(steps, table.mean(axis=0), table.std(axis=0))


def aggregate_to_csv(agg: Aggregate) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_HEADER)
    for s, m, sd in zip(agg.env_steps, agg.mean, agg.std):
        w.writerow([int(s), _fmt(m), _fmt(sd)])
    return buf.getvalue()


def aggregate_from_csv(text: str) -> Aggregate:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != AGG_HEADER:
        raise ValueError(f"expected header {','.join(AGG_HEADER)}")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r]).reshape(-1, 3)
    return Aggregate(data[:, 0], data[:, 1], data[:, 2])


# comparison ---------------------------------------------------------------


@dataclass
class Comparison:
    metric: str
    a_values: dict
    b_values: dict
    a_mean: float
    a_std: float
    b_mean: float
    b_std: float
    difference: float  # a_mean - b_mean
    preserved_fraction: float  # seed pairs whose sign matches the mean difference

    def summary(self, a_name: str = "A", b_name: str = "B") -> str:
        rel = ">" if self.difference > 0 else "<" if self.difference < 0 else "="
        return (
            f"{self.metric}: {a_name} {self.a_mean:.4f} ± {self.a_std:.4f} {rel} "
            f"{b_name} {self.b_mean:.4f} ± {self.b_std:.4f} "
            f"(diff {self.difference:+.4f}, ordering kept in {self.preserved_fraction:.0%} of seed pairs)"
        )


def metric_value(curve: LearningCurve, metric: str) -> float:
    if metric == "auc":
        return curve.auc
    if metric == "final_return":
        return curve.final_return
    raise ValueError(f"unknown metric {metric!r}")


def compare(a: Sequence[LearningCurve], b: Sequence[LearningCurve], metric: str = "auc") -> Comparison:
    if not a or not b:
        raise EmptyInput("both sides need at least one curve")
    budgets = {c.points[-1].env_steps for c in list(a) + list(b) if c.points}
    if len(budgets) != 1:
        raise IncomparableBudgets(f"curves end at different step counts: {sorted(budgets)}")
    av = {c.seed: metric_value(c, metric) for c in a}
    bv = {c.seed: metric_value(c, metric) for c in b}
    am, bm = float(np.mean(list(av.values()))), float(np.mean(list(bv.values())))
    diff = am - bm
    common = sorted(set(av) & set(bv))
    if common:
        pairs = [(av[s], bv[s]) for s in common]
    else:
        pairs = [(x, y) for x in av.values() for y in bv.values()]
    sign = np.sign(diff)
    kept = sum(1 for x, y in pairs if np.sign(x - y) == sign)
    return Comparison(
        metric, av, bv, am, float(np.std(list(av.values()))), bm, float(np.std(list(bv.values()))),
        diff, kept / len(pairs),
    )


def seeds_won(a: Iterable[LearningCurve], b: Iterable[LearningCurve], metric: str = "auc") -> int:
    """Number of common seeds where ``a`` strictly beats ``b``."""
    av = {c.seed: metric_value(c, metric) for c in a}
    bv = {c.seed: metric_value(c, metric) for c in b}
    return sum(1 for s in set(av) & set(bv) if av[s] > bv[s])


def is_close_mean(x: float, y: float, tol: float) -> bool:
    return math.isclose(x, y, abs_tol=tol, rel_tol=0.0)
