"""Named sweeps over Get-To-Goal control variants.

* ``variants``      - XY discrete / multi-discrete, continuous angle, tank controls
* ``tank-buttons``  - tank controls with and without backward / strafe
* ``extra-actions`` - K movement directions, discrete vs multi-discrete
* ``bogus-actions`` - K do-nothing actions, discrete vs multi-discrete
"""
from __future__ import annotations

from ..envs import (
    BogusActions,
    ContinuousAngle,
    DiscreteXY,
    ExtraDirections,
    GetToGoalParams,
    MultiDiscreteXY,
    TankDiscrete,
    TankMultiDiscrete,
)
from .config import ExperimentConfig

DEFAULT_SEEDS = tuple(range(10))
DEFAULT_BUDGET = 250_000
SWEEP_K = (4, 8, 16, 32, 64)

TANK_BUTTONS = {
    "minimal": dict(allow_backward=False, allow_strafe=False),
    "backward": dict(allow_backward=True, allow_strafe=False),
    "strafe": dict(allow_backward=False, allow_strafe=True),
    "backward-strafe": dict(allow_backward=True, allow_strafe=True),
}


def _exp(name, variant, seeds, budget) -> ExperimentConfig:
    return ExperimentConfig(name=name, env=GetToGoalParams(variant=variant), seeds=tuple(seeds), total_timesteps=budget)


def variants(seeds=DEFAULT_SEEDS, budget=DEFAULT_BUDGET) -> list[ExperimentConfig]:
    return [
        _exp("variants-discrete", DiscreteXY(), seeds, budget),
        _exp("variants-multidiscrete", MultiDiscreteXY(), seeds, budget),
        _exp("variants-continuous", ContinuousAngle(), seeds, budget),
        _exp("variants-tank-discrete", TankDiscrete(), seeds, budget),
        _exp("variants-tank-multidiscrete", TankMultiDiscrete(), seeds, budget),
    ]


def tank_buttons(seeds=DEFAULT_SEEDS, budget=DEFAULT_BUDGET, buttons=tuple(TANK_BUTTONS)) -> list[ExperimentConfig]:
    out = []
    for form, cls in (("discrete", TankDiscrete), ("multidiscrete", TankMultiDiscrete)):
        for label in buttons:
            out.append(_exp(f"tank-{form}-{label}", cls(**TANK_BUTTONS[label]), seeds, budget))
    return out


def extra_actions(seeds=DEFAULT_SEEDS, budget=DEFAULT_BUDGET, ks=SWEEP_K) -> list[ExperimentConfig]:
    return [
        _exp(f"extra-{mode}-K{k}", ExtraDirections(k, mode), seeds, budget)
        for mode in ("discrete", "multidiscrete")
        for k in ks
    ]


def bogus_actions(seeds=DEFAULT_SEEDS, budget=DEFAULT_BUDGET, ks=SWEEP_K) -> list[ExperimentConfig]:
    bases = (("discrete", DiscreteXY()), ("multidiscrete", MultiDiscreteXY()))
    return [_exp(f"bogus-{mode}-K{k}", BogusActions(base, k), seeds, budget) for mode, base in bases for k in ks]


PRESETS = {
    "variants": variants,
    "tank-buttons": tank_buttons,
    "extra-actions": extra_actions,
    "bogus-actions": bogus_actions,
}


def preset(name: str, seeds=None, budget=None) -> list[ExperimentConfig]:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    kwargs = {}
    if seeds is not None:
        kwargs["seeds"] = tuple(seeds)
    if budget is not None:
        kwargs["budget"] = budget
    return factory(**kwargs)
