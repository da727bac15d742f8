"""JSON experiment configs.

Example::

    {
      "name": "bogus-discrete-K32",
      "env": {"variant": {"type": "bogus_actions", "base": "discrete_xy", "K": 32},
              "params": {"step_size": 0.05}},
      "transforms": [{"op": "flatten", "max_pressed": 2}],
      "ppo": {"lr": 0.00025},
      "seeds": [0, 1, 2],
      "total_timesteps": 250000
    }

Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Union

from .. import envs
from ..ppo import PpoConfig
from ..shaping import (
    DiscretizeContinuous,
    FlattenMultiDiscrete,
    ForceAction,
    IncompatibleTransform,
    RemoveAction,
    TransformStack,
    static_mask,
)
from ..spaces import SpaceError

SEED_ENV_VAR = "ACTSHAPE_SEED"


class ConfigError(ValueError):
    pass


def _check_keys(obj: dict, allowed: set, required: set = frozenset(), where: str = "config"):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


# variants -----------------------------------------------------------------

_TANK_KEYS = {"type", "allow_backward", "allow_strafe"}


def variant_from_json(obj) -> envs.ControlVariant:
    if isinstance(obj, str):
        obj = {"type": obj}
    _check_keys(obj, {"type", "allow_backward", "allow_strafe", "K", "mode", "base"}, {"type"}, "env.variant")
    kind = obj["type"]
    try:
        if kind == "multidiscrete_xy":
            _check_keys(obj, {"type"}, where="env.variant")
            return envs.MultiDiscreteXY()
        if kind == "discrete_xy":
            _check_keys(obj, {"type"}, where="env.variant")
            return envs.DiscreteXY()
        if kind == "continuous_angle":
            _check_keys(obj, {"type"}, where="env.variant")
            return envs.ContinuousAngle()
        if kind in ("tank_discrete", "tank_multidiscrete"):
            _check_keys(obj, _TANK_KEYS, where="env.variant")
            cls = envs.TankDiscrete if kind == "tank_discrete" else envs.TankMultiDiscrete
            return cls(bool(obj.get("allow_backward", True)), bool(obj.get("allow_strafe", False)))
        if kind == "extra_directions":
            _check_keys(obj, {"type", "K", "mode"}, {"K"}, "env.variant")
            return envs.ExtraDirections(int(obj["K"]), obj.get("mode", "discrete"))
        if kind == "bogus_actions":
            _check_keys(obj, {"type", "K", "base"}, {"K"}, "env.variant")
            base = variant_from_json(obj.get("base", "discrete_xy"))
            return envs.BogusActions(base, int(obj["K"]))
    except envs.ParamError as exc:
        raise ConfigError(f"env.variant: {exc}") from exc
    raise ConfigError(f"env.variant: unknown type {kind!r}")


def variant_to_json(v) -> dict:
    if isinstance(v, envs.MultiDiscreteXY):
        return {"type": "multidiscrete_xy"}
    if isinstance(v, envs.DiscreteXY):
        return {"type": "discrete_xy"}
    if isinstance(v, envs.ContinuousAngle):
        return {"type": "continuous_angle"}
    if isinstance(v, (envs.TankDiscrete, envs.TankMultiDiscrete)):
        kind = "tank_discrete" if isinstance(v, envs.TankDiscrete) else "tank_multidiscrete"
        return {"type": kind, "allow_backward": v.allow_backward, "allow_strafe": v.allow_strafe}
    if isinstance(v, envs.ExtraDirections):
        return {"type": "extra_directions", "K": v.K, "mode": v.mode}
    if isinstance(v, envs.BogusActions):
        return {"type": "bogus_actions", "K": v.K, "base": variant_to_json(v.base)["type"]}
    raise TypeError(f"unknown variant {v!r}")


_PARAM_KEYS = {"arena_half_width", "step_size", "goal_radius", "timeout_steps", "turn_rate_deg"}


def env_from_json(obj) -> Union[str, envs.GetToGoalParams]:
    if obj == "bandit" or obj == {"type": "bandit"}:
        return "bandit"
    _check_keys(obj, {"variant", "params"}, {"variant"}, "env")
    params = obj.get("params", {})
    _check_keys(params, _PARAM_KEYS, where="env.params")
    try:
        return envs.GetToGoalParams(variant=variant_from_json(obj["variant"]), **params)
    except envs.ParamError as exc:
        raise ConfigError(f"env.params: {exc}") from exc


def env_to_json(spec) -> Any:
    if spec == "bandit":
        return "bandit"
    params = {k: getattr(spec, k) for k in sorted(_PARAM_KEYS)}
    return {"variant": variant_to_json(spec.variant), "params": params}


# transforms ---------------------------------------------------------------

_TRANSFORM_KEYS = {
    "remove": ({"op", "choices", "dim", "part"}, {"choices"}),
    "force": ({"op", "choice", "dim", "part"}, {"choice"}),
    "discretize": ({"op", "k", "magnitude", "dim", "part"}, {"k", "magnitude"}),
    "flatten": ({"op", "max_pressed", "part"}, set()),
    "mask": ({"op", "available"}, {"available"}),
}


def transform_from_json(obj: dict, index: int):
    where = f"transforms[{index}]"
    if not isinstance(obj, dict) or "op" not in obj:
        raise ConfigError(f"{where}: expected an object with an 'op' key")
    op = obj["op"]
    if op not in _TRANSFORM_KEYS:
        raise ConfigError(f"{where}: unknown op {op!r}")
    allowed, required = _TRANSFORM_KEYS[op]
    _check_keys(obj, allowed, required, where)
    try:
        if op == "remove":
            return RemoveAction(tuple(obj["choices"]), obj.get("dim"), obj.get("part"))
        if op == "force":
            return ForceAction(int(obj["choice"]), obj.get("dim"), obj.get("part"))
        if op == "discretize":
            return DiscretizeContinuous(int(obj["k"]), float(obj["magnitude"]), obj.get("dim", 0), obj.get("part"))
        if op == "flatten":
            return FlattenMultiDiscrete(obj.get("max_pressed", "all"), obj.get("part"))
        return static_mask(obj["available"])
    except IncompatibleTransform as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def transform_to_json(t) -> dict:
    def extra(**kw):
        return {k: v for k, v in kw.items() if v is not None}

    if isinstance(t, RemoveAction):
        return {"op": "remove", "choices": list(t.choices), **extra(dim=t.dim, part=t.part)}
    if isinstance(t, ForceAction):
        return {"op": "force", "choice": t.choice, **extra(dim=t.dim, part=t.part)}
    if isinstance(t, DiscretizeContinuous):
        return {"op": "discretize", "k": t.k, "magnitude": t.magnitude, "dim": t.dim, **extra(part=t.part)}
    if isinstance(t, FlattenMultiDiscrete):
        return {"op": "flatten", "max_pressed": t.max_pressed, **extra(part=t.part)}
    raise TypeError(f"cannot serialise {t!r}")


# experiment ---------------------------------------------------------------

_PPO_FIELDS = {f.name for f in fields(PpoConfig)} - {"seed", "total_timesteps"}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    env: Any
    transforms: tuple = ()
    ppo: dict = field(default_factory=dict)
    seeds: tuple[int, ...] = (0,)
    total_timesteps: int = 250_000
    transforms_json: tuple = ()

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        unknown = set(self.ppo) - _PPO_FIELDS
        if unknown:
            raise ConfigError(f"ppo: unknown keys {sorted(unknown)}")
        self.stack()  # validates transforms against the env action space
        self.ppo_config(self.seeds[0])

    @property
    def action_space(self):
        return envs.BanditEnv.action_space if self.env == "bandit" else self.env.action_space

    def stack(self) -> TransformStack:
        try:
            return TransformStack(self.action_space, self.transforms)
        except IncompatibleTransform as exc:
            raise ConfigError(f"transforms: {exc}") from exc

    def ppo_config(self, seed: int) -> PpoConfig:
        try:
            return PpoConfig(**self.ppo, seed=seed, total_timesteps=self.total_timesteps)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"ppo: {exc}") from exc

    def with_seeds(self, seeds) -> "ExperimentConfig":
        return replace(self, seeds=tuple(int(s) for s in seeds))

    def to_json(self) -> dict:
        transforms = list(self.transforms_json) or [transform_to_json(t) for t in self.transforms]
        return {
            "name": self.name,
            "env": env_to_json(self.env),
            "transforms": transforms,
            "ppo": dict(self.ppo),
            "seeds": list(self.seeds),
            "total_timesteps": self.total_timesteps,
        }


_TOP_KEYS = {"name", "env", "transforms", "ppo", "seeds", "total_timesteps"}


def config_from_json(obj: dict, apply_env_override: bool = True) -> ExperimentConfig:
    _check_keys(obj, _TOP_KEYS, {"name", "env"})
    raw_transforms = obj.get("transforms", [])
    if not isinstance(raw_transforms, list):
        raise ConfigError("transforms: expected a list")
    transforms = tuple(transform_from_json(t, i) for i, t in enumerate(raw_transforms))
    seeds = obj.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds: expected a list of integers")
    if apply_env_override:
        seeds = seeds_from_env(seeds)
    ppo = obj.get("ppo", {})
    if not isinstance(ppo, dict):
        raise ConfigError("ppo: expected an object")
    try:
        return ExperimentConfig(
            name=str(obj["name"]),
            env=env_from_json(obj["env"]),
            transforms=transforms,
            ppo=ppo,
            seeds=tuple(seeds),
            total_timesteps=int(obj.get("total_timesteps", 250_000)),
            transforms_json=tuple(raw_transforms),
        )
    except SpaceError as exc:
        raise ConfigError(str(exc)) from exc


def seeds_from_env(default):
    raw = os.environ.get(SEED_ENV_VAR)
    if not raw:
        return list(default)
    try:
        return [int(s) for s in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV_VAR}={raw!r} is not a list of integers") from exc


def load_config(path) -> ExperimentConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_json(obj)
