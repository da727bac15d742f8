"""Quick internal consistency checks behind ``actshape selftest``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .policy import PolicyNet
from .ppo import PpoConfig, ppo_loss, train
from .shaping import enumerate_combinations
from .spaces import Composite, Continuous, Discrete, MultiDiscrete

BANDIT_CONFIG = dict(n_steps=32, total_timesteps=5_000)


@dataclass
class Check:
    name: str
    ok: bool
    detail: str


def finite_difference_error(net: PolicyNet, loss_fn, obs, mask=None, step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    _, grad = net.gradients(loss_fn, obs, mask)
    theta = net.theta.copy()
    fd = np.zeros_like(grad)
    try:
        for i in range(theta.size):
            vals = []
            for sgn in (1.0, -1.0):
                net.theta[:] = theta
                net.theta[i] += sgn * step
                with ag.no_grad():
                    vals.append(float(loss_fn(net.forward(obs, mask)).data))
            fd[i] = (vals[0] - vals[1]) / (2 * step)
    finally:
        net.theta[:] = theta
    scale = max(np.max(np.abs(fd)), np.max(np.abs(grad)), 1e-12)
    return float(np.max(np.abs(fd - grad)) / scale)


def random_ppo_problem(space, rng, batch: int = 6, obs_size: int = 4):
    net = PolicyNet(obs_size, space, seed=int(rng.integers(1 << 31)), dtype=np.float64, hidden=8)
    net.theta[:] = rng.normal(0.0, 0.5, net.theta.size)
    obs = rng.normal(size=(batch, obs_size))
    with ag.no_grad():
        dist = net.forward(obs)
        cat, real = dist.sample(rng)
        old = dist.log_prob(cat, real).data + rng.normal(0.0, 0.1, batch)
    adv = rng.normal(size=batch)
    ret = rng.normal(size=batch)
    config = PpoConfig()

    def loss_fn(d):
        return ppo_loss(d, cat, real, old, adv, ret, config)[0]

    return net, loss_fn, obs


HEAD_SPACES = (
    Discrete(5),
    MultiDiscrete((3, 2, 2)),
    Continuous(2, ((-1.0, 1.0), (0.0, 360.0))),
    Composite((Discrete(3), Continuous(1, ((-2.0, 2.0),)))),
)


def check_gradients(n_nets: int = 8, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_nets):
        net, loss_fn, obs = random_ppo_problem(HEAD_SPACES[i % len(HEAD_SPACES)], rng)
        worst = max(worst, finite_difference_error(net, loss_fn, obs))
    return Check("gradient check", worst < 1e-4, f"max relative error {worst:.2e} over {n_nets} nets")


def check_enumeration(max_buttons: int = 10) -> Check:
    for b in range(1, max_buttons + 1):
        for n in (1, 2, "all"):
            got = len(enumerate_combinations((2,) * b, n))
            want = 2**b if n == "all" else sum(math.comb(b, j) for j in range(min(n, b) + 1))
            if got != want:
                return Check("enumeration laws", False, f"B={b} n={n}: {got} != {want}")
    return Check("enumeration laws", True, f"counts match for B <= {max_buttons}, n in (1, 2, all)")


def check_bandit(seed: int = 0) -> Check:
    result = train(PpoConfig(seed=seed, **BANDIT_CONFIG), "bandit")
    with ag.no_grad():
        p_best = float(result.net.forward(np.ones((1, 1))).probs()[0][0, 1])
    return Check("bandit convergence", p_best > 0.95, f"P(best arm) = {p_best:.4f} after {BANDIT_CONFIG['total_timesteps']} steps")


def run_all() -> list[Check]:
    return [check_gradients(), check_enumeration(), check_bandit()]
