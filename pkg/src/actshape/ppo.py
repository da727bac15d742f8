"""Clipped-surrogate PPO over a vector env and a transform stack."""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import autograd as ag
from .envs import VectorEnv, make_env_factory
from .policy import Adam, Distribution, PolicyNet
from .shaping import TransformStack

log = logging.getLogger(__name__)


class NonFiniteLoss(RuntimeError):
    pass


class TrainingError(RuntimeError):
    def __init__(self, message: str, iteration: int):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {message}")


@dataclass(frozen=True)
class PpoConfig:
    n_envs: int = 8
    n_steps: int = 256
    epochs: int = 4
    minibatches: int = 4
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    lr: float = 2.5e-4
    gamma: float = 0.99
    lam: float = 0.95
    max_grad_norm: float = 0.5
    total_timesteps: int = 250_000
    seed: int = 0
    window: int = 100

    def __post_init__(self):
        for name in ("n_envs", "n_steps", "epochs", "minibatches", "total_timesteps", "window"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        for name in ("entropy_coef", "value_coef", "lr", "max_grad_norm"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be non-negative, got {v!r}")
        if self.lr <= 0 or self.max_grad_norm <= 0:
            raise ValueError("lr and max_grad_norm must be positive")
        if not 0 < self.clip_eps < 1:
            raise ValueError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if not (0 < self.gamma <= 1 and 0 < self.lam <= 1):
            raise ValueError("gamma and lam must be in (0, 1]")
        if (self.n_envs * self.n_steps) % self.minibatches:
            raise ValueError("n_envs * n_steps must be divisible by minibatches")

    @property
    def batch_size(self) -> int:
        return self.n_envs * self.n_steps

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RolloutBatch:
    """Arrays indexed ``[step, env]``."""

    obs: np.ndarray
    cat: np.ndarray
    real: np.ndarray
    logp: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    last_values: np.ndarray
    masks: Optional[np.ndarray] = None
    episodes: list = field(default_factory=list)  # (return, length, cause) in completion order

    @property
    def n_steps(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_envs(self) -> int:
        return self.rewards.shape[1]

    def flat(self, name: str) -> np.ndarray:
        a = getattr(self, name)
        return a.reshape((a.shape[0] * a.shape[1],) + a.shape[2:])


class Rollout:
    """Persistent collection state: the vector env and its current observations."""

    def __init__(self, venv: VectorEnv, stack: TransformStack):
        self.venv = venv
        self.stack = stack
        self.obs = venv.reset()

    def _masks(self, obs):
        if not self.stack.masked:
            return None
        return np.stack([self.stack.availability(o) for o in obs])

    def collect(self, net: PolicyNet, n_steps: int, rng: np.random.Generator) -> RolloutBatch:
        N, lay = self.venv.n_envs, net.layout
        obs_buf = np.zeros((n_steps, N, self.venv.observation_size), dtype=net.dtype)
        cat_buf = np.zeros((n_steps, N, lay.n_cat), dtype=np.int64)
        real_buf = np.zeros((n_steps, N, lay.n_real))
        logp_buf = np.zeros((n_steps, N), dtype=net.dtype)
        rew_buf = np.zeros((n_steps, N))
        done_buf = np.zeros((n_steps, N), dtype=bool)
        val_buf = np.zeros((n_steps, N), dtype=net.dtype)
        mask_buf = np.zeros((n_steps, N, lay.n_logits), dtype=bool) if self.stack.masked else None
        episodes = []
        with ag.no_grad():
            for t in range(n_steps):
                mask = self._masks(self.obs)
                dist = net.forward(self.obs, mask)
                cat, real = dist.sample(rng)
                obs_buf[t] = self.obs
                cat_buf[t] = cat
                real_buf[t] = real
                logp_buf[t] = dist.log_prob(cat, real).data
                val_buf[t] = dist.value.data
                if mask_buf is not None:
                    mask_buf[t] = mask
                actions = [self.stack.decode(a) for a in lay.unpack(cat, real)]
                self.obs, rew_buf[t], done_buf[t], finished = self.venv.step(actions)
                episodes.extend((ret, length, cause) for _, ret, length, cause in finished)
            last_values = net.forward(self.obs, self._masks(self.obs)).value.data.copy()
        return RolloutBatch(obs_buf, cat_buf, real_buf, logp_buf, rew_buf, done_buf, val_buf, last_values, mask_buf, episodes)


def compute_gae(rewards, values, dones, last_values, gamma: float, lam: float):
    """Advantages and returns; all arrays ``[step, env]``."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    next_adv = np.zeros_like(rewards[0])
    next_value = np.asarray(last_values, dtype=np.float64)
    for t in reversed(range(T)):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        next_adv = delta + gamma * lam * live * next_adv
        adv[t] = next_adv
        next_value = values[t]
    return adv, adv + values


def normalize(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + eps)


def ppo_loss(dist: Distribution, cat, real, old_logp, adv, returns, config: PpoConfig):
    """Scalar loss to minimize plus a dict of diagnostics (plain floats)."""
    new_logp = dist.log_prob(cat, real)
    ratio = ag.exp(new_logp - old_logp)
    surr = ag.minimum(ratio * adv, ag.clip(ratio, 1 - config.clip_eps, 1 + config.clip_eps) * adv)
    pg_loss = -ag.mean(surr)
    v_loss = 0.5 * ag.mean(ag.square(dist.value - returns))
    entropy = ag.mean(dist.entropy())
    loss = pg_loss + config.value_coef * v_loss - config.entropy_coef * entropy
    r = ratio.data
    stats = {
        "policy_loss": float(pg_loss.data),
        "value_loss": float(v_loss.data),
        "entropy": float(entropy.data),
        "clip_fraction": float(np.mean(np.abs(r - 1) > config.clip_eps)),
        "approx_kl": float(np.mean(old_logp - new_logp.data)),
    }
    return loss, stats


def ppo_update(net: PolicyNet, opt: Adam, batch: RolloutBatch, advantages, returns, config: PpoConfig, rng) -> dict:
    obs = batch.flat("obs")
    cat = batch.flat("cat")
    real = batch.flat("real")
    old_logp = batch.flat("logp")
    masks = batch.flat("masks") if batch.masks is not None else None
    dt = net.dtype
    adv = normalize(advantages.reshape(-1)).astype(dt)
    ret = returns.reshape(-1).astype(dt)
    B = obs.shape[0]
    mb = B // config.minibatches
    totals: dict = {}
    count = 0
    for _ in range(config.epochs):
        order = rng.permutation(B)
        for k in range(config.minibatches):
            idx = order[k * mb:(k + 1) * mb]
            stats: dict = {}

            def loss_fn(dist):
                loss, s = ppo_loss(dist, cat[idx], real[idx], old_logp[idx], adv[idx], ret[idx], config)
                stats.update(s)
                return loss

            loss, grad = net.gradients(loss_fn, obs[idx], None if masks is None else masks[idx])
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                raise NonFiniteLoss(f"non-finite loss/gradient: loss={loss}, stats={stats}")
            norm = float(np.sqrt(np.sum(grad.astype(np.float64) ** 2)))
            if norm > config.max_grad_norm:
                grad = grad * (config.max_grad_norm / (norm + 1e-6))
            opt.step(net.theta, grad)
            for key, v in stats.items():
                totals[key] = totals.get(key, 0.0) + v
            count += 1
    return {k: v / count for k, v in totals.items()}


@dataclass
class CurvePoint:
    env_steps: int
    mean_return: float
    std_return: float
    episodes_completed: int


@dataclass
class TrainResult:
    curve: list[CurvePoint]
    net: PolicyNet
    metrics: list[dict]


def train(
    config: PpoConfig,
    env_spec,
    stack: Optional[TransformStack] = None,
    callback: Optional[Callable[[dict], None]] = None,
) -> TrainResult:
    """Run PPO until ``total_timesteps``; one curve point per iteration."""
    make_env = make_env_factory(env_spec)
    seeds = np.random.SeedSequence(config.seed).generate_state(3)
    venv = VectorEnv(make_env, config.n_envs, seed=int(seeds[0]))
    stack = stack or TransformStack(venv.action_space, ())
    if stack.original != venv.action_space:
        raise ValueError(f"transform stack expects {stack.original!r}, env has {venv.action_space!r}")
    net = PolicyNet(venv.observation_size, stack.shaped, seed=int(seeds[1]))
    rng = np.random.default_rng(int(seeds[2]))
    opt = Adam(net.theta.size, lr=config.lr)
    rollout = Rollout(venv, stack)

    window: deque = deque(maxlen=config.window)
    episodes_done = 0
    steps = 0
    curve, metrics = [], []
    iterations = max(1, config.total_timesteps // config.batch_size)
    for it in range(iterations):
        try:
            batch = rollout.collect(net, config.n_steps, rng)
            adv, ret = compute_gae(batch.rewards, batch.values, batch.dones, batch.last_values, config.gamma, config.lam)
            stats = ppo_update(net, opt, batch, adv, ret, config, rng)
        except Exception as exc:
            raise TrainingError(f"{type(exc).__name__}: {exc}", it) from exc
        steps += batch.n_steps * batch.n_envs
        for ep_ret, _, _ in batch.episodes:
            window.append(ep_ret)
        episodes_done += len(batch.episodes)
        w = np.asarray(window)
        point = CurvePoint(steps, float(w.mean()) if w.size else 0.0, float(w.std()) if w.size else 0.0, episodes_done)
        curve.append(point)
        record = {"iteration": it, **asdict(point), **stats}
        metrics.append(record)
        if callback is not None:
            callback(record)
        log.debug("iter %d steps %d return %.3f", it, steps, point.mean_return)
    return TrainResult(curve, net, metrics)
