"""Get-To-Goal navigation environments, a two-armed bandit and a vector env.

Angles are compass degrees: 0 is straight up, 90 straight right, 180
straight down. The unit vector for angle ``theta`` is ``(sin theta, cos theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from .spaces import ActionSpace, Continuous, Discrete, MultiDiscrete, contains


class InvalidAction(ValueError):
    def __init__(self, message: str, env_index: Optional[int] = None):
        self.env_index = env_index
        if env_index is not None:
            message = f"env {env_index}: {message}"
        super().__init__(message)


class ParamError(ValueError):
    pass


def heading_vector(theta_deg: float) -> tuple[float, float]:
    rad = math.radians(theta_deg)
    return math.sin(rad), math.cos(rad)


def _normalized_sum(vectors) -> tuple[float, float]:
    x = y = 0.0
    for vx, vy in vectors:
        x += vx
        y += vy
    norm = math.hypot(x, y)
    # cancelling buttons leave float dust; treat as no movement
    if norm < 1e-9:
        return 0.0, 0.0
    return x / norm, y / norm


UP, DOWN, LEFT, RIGHT = (0.0, 1.0), (0.0, -1.0), (-1.0, 0.0), (1.0, 0.0)
XY_BUTTONS = (UP, DOWN, LEFT, RIGHT)


# --------------------------------------------------------------------------
# control variants


@dataclass(frozen=True)
class MultiDiscreteXY:
    """Four independent buttons: Up, Down, Left, Right."""

    @property
    def space(self) -> ActionSpace:
        return MultiDiscrete((2, 2, 2, 2))

    def effect(self, action, heading):
        return _normalized_sum(v for v, pressed in zip(XY_BUTTONS, action) if pressed), 0.0


@dataclass(frozen=True)
class DiscreteXY:
    """0 = no-op, then Up, Down, Left, Right."""

    @property
    def space(self) -> ActionSpace:
        return Discrete(5)

    def effect(self, action, heading):
        if action == 0:
            return (0.0, 0.0), 0.0
        return XY_BUTTONS[action - 1], 0.0


@dataclass(frozen=True)
class ContinuousAngle:
    """One real: direction of the move in degrees, wrapped modulo 360."""

    @property
    def space(self) -> ActionSpace:
        return Continuous(1, ((0.0, 360.0),))

    def effect(self, action, heading):
        return heading_vector(float(action[0]) % 360.0), 0.0


def _tank_effect(move: int, turn: int, strafe: int, heading: float, turn_rate: float):
    """move: 0 none / 1 fwd / 2 back; turn: 0 none / 1 left / 2 right; strafe likewise."""
    dh = (0.0, -turn_rate, turn_rate)[turn]
    new_heading = heading + dh
    vecs = []
    if move:
        fx, fy = heading_vector(new_heading)
        vecs.append((fx, fy) if move == 1 else (-fx, -fy))
    if strafe:
        sx, sy = heading_vector(new_heading + 90.0)
        vecs.append((-sx, -sy) if strafe == 1 else (sx, sy))
    return _normalized_sum(vecs), dh


@dataclass(frozen=True)
class TankDiscrete:
    """Heading-relative controls, one choice per step.

    Actions: no-op, forward, [backward], turn-left, turn-right,
    [strafe-left, strafe-right].
    """

    allow_backward: bool = True
    allow_strafe: bool = False
    turn_rate_deg: float = 15.0

    def _table(self):
        # (move, turn, strafe)
        table = [(0, 0, 0), (1, 0, 0)]
        if self.allow_backward:
            table.append((2, 0, 0))
        table += [(0, 1, 0), (0, 2, 0)]
        if self.allow_strafe:
            table += [(0, 0, 1), (0, 0, 2)]
        return tuple(table)

    @property
    def space(self) -> ActionSpace:
        return Discrete(len(self._table()))

    def effect(self, action, heading):
        move, turn, strafe = self._table()[action]
        return _tank_effect(move, turn, strafe, heading, self.turn_rate_deg)


@dataclass(frozen=True)
class TankMultiDiscrete:
    """Movement {none, fwd, [back]} x turning {none, left, right} [x strafe {none, left, right}]."""

    allow_backward: bool = True
    allow_strafe: bool = False
    turn_rate_deg: float = 15.0

    @property
    def space(self) -> ActionSpace:
        arities = (3 if self.allow_backward else 2, 3)
        if self.allow_strafe:
            arities += (3,)
        return MultiDiscrete(arities)

    def effect(self, action, heading):
        strafe = action[2] if self.allow_strafe else 0
        return _tank_effect(action[0], action[1], strafe, heading, self.turn_rate_deg)


@dataclass(frozen=True)
class ExtraDirections:
    """K directions equally spaced on the unit circle; action i heads 360*i/K degrees."""

    K: int
    mode: str = "discrete"

    def __post_init__(self):
        if self.K < 1:
            raise ParamError(f"ExtraDirections needs K >= 1, got {self.K}")
        if self.mode not in ("discrete", "multidiscrete"):
            raise ParamError(f"mode must be 'discrete' or 'multidiscrete', got {self.mode!r}")

    @property
    def space(self) -> ActionSpace:
        if self.mode == "discrete":
            return Discrete(self.K)
        return MultiDiscrete((2,) * self.K)

    def angle(self, i: int) -> float:
        return 360.0 * i / self.K

    @cached_property
    def _directions(self) -> tuple:
        return tuple(heading_vector(self.angle(i)) for i in range(self.K))

    def effect(self, action, heading):
        if self.mode == "discrete":
            return self._directions[action], 0.0
        return _normalized_sum(self._directions[i] for i, p in enumerate(action) if p), 0.0


@dataclass(frozen=True)
class BogusActions:
    """Base XY controls plus K actions (or buttons) that do nothing."""

    base: Union[DiscreteXY, MultiDiscreteXY]
    K: int

    def __post_init__(self):
        if self.K < 0:
            raise ParamError(f"BogusActions needs K >= 0, got {self.K}")
        if not isinstance(self.base, (DiscreteXY, MultiDiscreteXY)):
            raise ParamError("BogusActions base must be DiscreteXY or MultiDiscreteXY")

    @property
    def space(self) -> ActionSpace:
        if isinstance(self.base, DiscreteXY):
            return Discrete(5 + self.K)
        return MultiDiscrete((2,) * (4 + self.K))

    def effect(self, action, heading):
        if isinstance(self.base, DiscreteXY):
            return self.base.effect(action if action < 5 else 0, heading)
        return self.base.effect(tuple(action)[:4], heading)


ControlVariant = Union[
    MultiDiscreteXY, DiscreteXY, ContinuousAngle, TankDiscrete, TankMultiDiscrete, ExtraDirections, BogusActions
]


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GetToGoalParams:
    arena_half_width: float = 1.0
    step_size: float = 0.05
    goal_radius: float = 0.1
    timeout_steps: int = 100
    turn_rate_deg: float = 15.0
    variant: ControlVariant = DiscreteXY()

    def __post_init__(self):
        h = self.arena_half_width
        if not 0 < self.step_size < h:
            raise ParamError(f"need 0 < step_size < arena_half_width, got {self.step_size}")
        if not 0 < self.goal_radius < h:
            raise ParamError(f"need 0 < goal_radius < arena_half_width, got {self.goal_radius}")
        if int(self.timeout_steps) != self.timeout_steps or self.timeout_steps < 1:
            raise ParamError(f"timeout_steps must be a positive integer, got {self.timeout_steps}")
        if not 0 < self.turn_rate_deg <= 180:
            raise ParamError(f"need 0 < turn_rate_deg <= 180, got {self.turn_rate_deg}")
        v = self.variant
        # tank variants take their turning rate from the env params
        if isinstance(v, (TankDiscrete, TankMultiDiscrete)) and v.turn_rate_deg != self.turn_rate_deg:
            object.__setattr__(self, "variant", replace(v, turn_rate_deg=self.turn_rate_deg))

    @property
    def action_space(self) -> ActionSpace:
        return self.variant.space


@dataclass(frozen=True)
class EnvState:
    player: tuple[float, float]
    heading_deg: float
    goal: tuple[float, float]
    steps_elapsed: int = 0


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    cause: str = "none"  # "goal" | "timeout" | "none"


def observe(state: EnvState, params: GetToGoalParams) -> np.ndarray:
    h2 = 2.0 * params.arena_half_width
    rad = math.radians(state.heading_deg)
    return np.array(
        [
            (state.goal[0] - state.player[0]) / h2,
            (state.goal[1] - state.player[1]) / h2,
            math.cos(rad),
            math.sin(rad),
        ]
    )


def reset(params: GetToGoalParams, rng: np.random.Generator) -> tuple[EnvState, np.ndarray]:
    h = params.arena_half_width
    min_dist = 2.0 * params.goal_radius
    while True:
        px, py, gx, gy = rng.uniform(-h, h, size=4)
        if math.hypot(gx - px, gy - py) > min_dist:
            break
    state = EnvState((float(px), float(py)), 0.0, (float(gx), float(gy)), 0)
    return state, observe(state, params)


def _check_action(space: ActionSpace, action) -> None:
    if isinstance(space, Continuous):
        # angles wrap, so any finite real of the right shape is accepted
        try:
            vals = tuple(float(x) for x in action)
        except TypeError:
            raise InvalidAction(f"{action!r} is not a real vector") from None
        if len(vals) != space.dims or not all(math.isfinite(v) for v in vals):
            raise InvalidAction(f"{action!r} does not fit {space!r}")
        return
    if not contains(space, action):
        raise InvalidAction(f"{action!r} is not in {space!r}")


def step(state: EnvState, params: GetToGoalParams, action, rng=None) -> tuple[EnvState, StepResult]:
    _check_action(params.action_space, action)
    (dx, dy), dh = params.variant.effect(action, state.heading_deg)
    h = params.arena_half_width
    s = params.step_size
    px = min(max(state.player[0] + s * dx, -h), h)
    py = min(max(state.player[1] + s * dy, -h), h)
    heading = (state.heading_deg + dh) % 360.0
    new = EnvState((px, py), heading, state.goal, state.steps_elapsed + 1)
    obs = observe(new, params)
    if math.hypot(state.goal[0] - px, state.goal[1] - py) <= params.goal_radius:
        return new, StepResult(obs, 1.0, True, "goal")
    if new.steps_elapsed >= params.timeout_steps:
        return new, StepResult(obs, 0.0, True, "timeout")
    return new, StepResult(obs, 0.0, False, "none")


# --------------------------------------------------------------------------
# stateful wrappers used by the trainer


class GetToGoalEnv:
    observation_size = 4

    def __init__(self, params: GetToGoalParams, seed: int):
        self.params = params
        self.action_space = params.action_space
        self.rng = np.random.default_rng(seed)
        self.state: Optional[EnvState] = None

    def reset(self) -> np.ndarray:
        self.state, obs = reset(self.params, self.rng)
        return obs

    def step(self, action) -> StepResult:
        self.state, result = step(self.state, self.params, action, self.rng)
        return result


def bandit_step(arm: int) -> float:
    if arm not in (0, 1):
        raise InvalidAction(f"bandit arm must be 0 or 1, got {arm!r}")
    return float(arm)


class BanditEnv:
    """Single-step episodes: arm 0 pays 0, arm 1 pays 1."""

    observation_size = 1
    action_space = Discrete(2)

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def reset(self) -> np.ndarray:
        return np.ones(1)

    def step(self, action) -> StepResult:
        if not contains(self.action_space, action):
            raise InvalidAction(f"{action!r} is not in {self.action_space!r}")
        return StepResult(np.ones(1), bandit_step(action), True, "goal")


class VectorEnv:
    """N independent envs stepped in lockstep; finished episodes auto-reset.

    Env ``i`` is seeded with ``seed + i``.
    """

    def __init__(self, make_env, n_envs: int, seed: int):
        self.envs = [make_env(seed + i) for i in range(n_envs)]
        self.n_envs = n_envs
        self.action_space = self.envs[0].action_space
        self.observation_size = self.envs[0].observation_size
        self._obs: Optional[np.ndarray] = None
        self._ep_len = np.zeros(n_envs, dtype=np.int64)
        self._ep_ret = np.zeros(n_envs)

    def reset(self) -> np.ndarray:
        self._obs = np.stack([e.reset() for e in self.envs])
        self._ep_len[:] = 0
        self._ep_ret[:] = 0.0
        return self._obs

    def step(self, actions: Sequence):
        if len(actions) != self.n_envs:
            raise InvalidAction(f"expected {self.n_envs} actions, got {len(actions)}")
        obs = np.empty((self.n_envs, self.observation_size))
        rewards = np.empty(self.n_envs)
        dones = np.zeros(self.n_envs, dtype=bool)
        finished = []  # (env index, episode return, episode length, cause)
        for i, (env, a) in enumerate(zip(self.envs, actions)):
            try:
                res = env.step(a)
            except InvalidAction as exc:
                raise InvalidAction(str(exc), env_index=i) from exc
            rewards[i] = res.reward
            self._ep_ret[i] += res.reward
            self._ep_len[i] += 1
            if res.done:
                dones[i] = True
                finished.append((i, float(self._ep_ret[i]), int(self._ep_len[i]), res.cause))
                self._ep_ret[i] = 0.0
                self._ep_len[i] = 0
                obs[i] = env.reset()
            else:
                obs[i] = res.observation
        self._obs = obs
        return obs, rewards, dones, finished


def make_env_factory(env_spec):
    """``env_spec`` is either ``"bandit"`` or a :class:`GetToGoalParams`."""
    if env_spec == "bandit":
        return BanditEnv
    if isinstance(env_spec, GetToGoalParams):
        return lambda seed: GetToGoalEnv(env_spec, seed)
    raise ParamError(f"unknown env spec {env_spec!r}")
