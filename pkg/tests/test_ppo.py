import numpy as np
import pytest

from actshape import autograd as ag
from actshape.envs import DiscreteXY, GetToGoalParams, MultiDiscreteXY, VectorEnv, make_env_factory
from actshape.policy import Adam, PolicyNet
from actshape.ppo import (
    NonFiniteLoss,
    PpoConfig,
    Rollout,
    TrainingError,
    compute_gae,
    normalize,
    ppo_loss,
    ppo_update,
    train,
)
from actshape.shaping import FlattenMultiDiscrete, TransformStack, static_mask
from actshape.spaces import Discrete, MultiDiscrete


def test_defaults():
    c = PpoConfig()
    assert (c.n_envs, c.n_steps, c.epochs, c.minibatches) == (8, 256, 4, 4)
    assert (c.clip_eps, c.entropy_coef, c.lr) == (0.2, 0.01, 2.5e-4)
    assert c.batch_size == 2048


@pytest.mark.parametrize(
    "kw",
    [dict(n_envs=0), dict(n_steps=1.5), dict(clip_eps=1.0), dict(clip_eps=0.0), dict(gamma=0.0),
     dict(lam=1.5), dict(lr=0.0), dict(entropy_coef=-0.1), dict(max_grad_norm=float("nan")),
     dict(n_envs=3, n_steps=3, minibatches=4), dict(epochs=True)],
)
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        PpoConfig(**kw)


# GAE --------------------------------------------------------------------------------------------


def test_gae_single_step_episode():
    adv, ret = compute_gae([[1.0]], [[0.25]], [[True]], [5.0], 0.99, 0.95)
    assert adv.tolist() == [[0.75]] and ret.tolist() == [[1.0]]


def test_gae_lambda_one_is_discounted_return():
    r = np.array([[0.0], [0.0], [1.0]])
    v = np.array([[0.1], [0.2], [0.3]])
    adv, ret = compute_gae(r, v, np.zeros((3, 1), bool), [0.5], gamma=0.9, lam=1.0)
    want = np.array([0.9**2 * 1 + 0.9**3 * 0.5, 0.9 * 1 + 0.9**2 * 0.5, 1 + 0.9 * 0.5])
    np.testing.assert_allclose(ret[:, 0], want, rtol=1e-14)


def test_gae_lambda_zero_is_td_error():
    rng = np.random.default_rng(0)
    r, v = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    last = rng.normal(size=2)
    adv, _ = compute_gae(r, v, np.zeros((5, 2), bool), last, gamma=0.9, lam=1e-300)
    nxt = np.vstack([v[1:], last])
    np.testing.assert_allclose(adv, r + 0.9 * nxt - v, atol=1e-14)


def test_gae_does_not_leak_across_episodes():
    r = np.array([[0.0], [0.0]])
    v = np.array([[0.0], [0.0]])
    dones = np.array([[True], [False]])
    adv, _ = compute_gae(r, v, dones, [100.0], 0.99, 0.95)
    assert adv[0, 0] == 0.0 and adv[1, 0] == pytest.approx(99.0)


def test_normalize():
    a = normalize(np.array([1.0, 2.0, 3.0, 4.0]))
    assert a.mean() == pytest.approx(0.0, abs=1e-12) and a.std() == pytest.approx(1.0, rel=1e-6)
    assert np.all(normalize(np.zeros(3)) == 0)


# loss ------------------------------------------------------------------------------------------


def _dist_and_actions(space=Discrete(4), batch=16, seed=0):
    rng = np.random.default_rng(seed)
    net = PolicyNet(3, space, seed=seed, dtype=np.float64, hidden=8)
    obs = rng.normal(size=(batch, 3))
    with ag.no_grad():
        dist = net.forward(obs)
        cat, real = dist.sample(rng)
        logp = dist.log_prob(cat, real).data
    return net, obs, dist, cat, real, logp, rng


def test_ratio_one_surrogate_is_mean_advantage():
    net, obs, dist, cat, real, logp, rng = _dist_and_actions()
    adv = rng.normal(size=16)
    _, stats = ppo_loss(dist, cat, real, logp, adv, np.zeros(16), PpoConfig())
    assert stats["policy_loss"] == pytest.approx(-adv.mean(), abs=1e-12)
    assert stats["clip_fraction"] == 0.0
    assert stats["approx_kl"] == pytest.approx(0.0, abs=1e-12)


def test_zero_advantage_only_value_and_entropy_move_parameters():
    net, obs, dist, cat, real, logp, rng = _dist_and_actions()
    cfg = PpoConfig(entropy_coef=0.0)
    # perturb old log-probs so ratios differ from 1; with zero advantages the surrogate is still flat
    old = logp + rng.normal(0, 0.3, 16)

    def loss_fn(d):
        return ppo_loss(d, cat, real, old, np.zeros(16), np.zeros(16), cfg)[0]

    _, grad = net.gradients(loss_fn, obs)
    v = net.views(grad)
    assert not v["wpi"].any() and not v["bpi"].any()
    assert v["wv"].any()


def test_clipping_counts():
    net, obs, dist, cat, real, logp, rng = _dist_and_actions()
    old = logp.copy()
    old[:4] -= 1.0  # ratio e^1 on four rows
    _, stats = ppo_loss(dist, cat, real, old, np.ones(16), np.zeros(16), PpoConfig())
    assert stats["clip_fraction"] == 0.25


def test_update_moves_toward_advantaged_action():
    cfg = PpoConfig(n_envs=1, n_steps=64, minibatches=1, epochs=20, lr=1e-2, entropy_coef=0.0)
    net = PolicyNet(1, Discrete(2), seed=0, dtype=np.float64, hidden=4)
    obs = np.ones((64, 1, 1))
    with ag.no_grad():
        p0 = net.forward(np.ones((1, 1))).probs()[0][0, 1]
    from actshape.ppo import RolloutBatch

    cat = np.tile([[0], [1]], (32, 1)).reshape(64, 1, 1)
    with ag.no_grad():
        logp = net.forward(np.ones((64, 1))).log_prob(cat.reshape(64, 1), np.zeros((64, 0))).data.reshape(64, 1)
    batch = RolloutBatch(obs, cat, np.zeros((64, 1, 0)), logp, np.zeros((64, 1)), np.zeros((64, 1), bool),
                         np.zeros((64, 1)), np.zeros(1))
    adv = np.where(cat[:, :, 0] == 1, 1.0, -1.0)
    ppo_update(net, Adam(net.theta.size, lr=cfg.lr), batch, adv, adv, cfg, np.random.default_rng(0))
    with ag.no_grad():
        p1 = net.forward(np.ones((1, 1))).probs()[0][0, 1]
    assert p1 > p0 + 0.1


def test_non_finite_loss_aborts():
    cfg = PpoConfig(n_envs=1, n_steps=4, minibatches=1, epochs=1)
    net = PolicyNet(1, Discrete(2), seed=0, dtype=np.float64, hidden=4)
    from actshape.ppo import RolloutBatch

    batch = RolloutBatch(np.ones((4, 1, 1)), np.zeros((4, 1, 1), int), np.zeros((4, 1, 0)), np.zeros((4, 1)),
                         np.zeros((4, 1)), np.zeros((4, 1), bool), np.zeros((4, 1)), np.zeros(1))
    with pytest.raises(NonFiniteLoss):
        ppo_update(net, Adam(net.theta.size), batch, np.ones((4, 1)), np.full((4, 1), np.nan), cfg,
                   np.random.default_rng(0))


# rollout -----------------------------------------------------------------------------------------


def test_rollout_shapes_and_decoding():
    params = GetToGoalParams(variant=MultiDiscreteXY())
    stack = TransformStack(MultiDiscreteXY().space, [FlattenMultiDiscrete(1), static_mask([1, 1, 1, 0, 1])])
    venv = VectorEnv(make_env_factory(params), 3, seed=0)
    net = PolicyNet(4, stack.shaped, seed=0)
    batch = Rollout(venv, stack).collect(net, 50, np.random.default_rng(0))
    assert batch.obs.shape == (50, 3, 4)
    assert batch.cat.shape == (50, 3, 1)
    assert batch.masks.shape == (50, 3, 5)
    assert not np.any(batch.cat == 3)
    assert np.all(np.isfinite(batch.logp))
    assert batch.last_values.shape == (3,)
    assert batch.flat("cat").shape == (150, 1)


def test_train_wraps_failures_with_iteration():
    # a stack for the wrong space is rejected up front
    with pytest.raises(ValueError):
        train(PpoConfig(n_steps=8, total_timesteps=64), GetToGoalParams(), TransformStack(MultiDiscrete((2, 2)), []))

    cfg = PpoConfig(n_envs=2, n_steps=8, total_timesteps=32, minibatches=2)
    bad = TransformStack(Discrete(5), [static_mask([0, 0, 0, 0, 0])])
    with pytest.raises(TrainingError) as info:
        train(cfg, GetToGoalParams(variant=DiscreteXY()), bad)
    assert info.value.iteration == 0


# train -------------------------------------------------------------------------------------------


def test_train_curve_and_metrics():
    cfg = PpoConfig(n_envs=4, n_steps=32, total_timesteps=512, seed=3)
    seen = []
    result = train(cfg, GetToGoalParams(variant=DiscreteXY(), timeout_steps=20), callback=seen.append)
    assert [p.env_steps for p in result.curve] == [128, 256, 384, 512]
    assert len(seen) == 4 and seen[-1]["env_steps"] == 512
    assert all(0.0 <= p.mean_return <= 1.0 for p in result.curve)
    eps = [p.episodes_completed for p in result.curve]
    assert eps == sorted(eps) and eps[-1] >= 4 * (128 // 20)  # every env times out at worst
    assert {"policy_loss", "value_loss", "entropy", "clip_fraction", "approx_kl"} <= set(seen[0])


def test_train_is_bitwise_reproducible():
    cfg = PpoConfig(n_envs=2, n_steps=32, total_timesteps=256, seed=7)
    params = GetToGoalParams(variant=MultiDiscreteXY())
    stack = TransformStack(MultiDiscreteXY().space, [FlattenMultiDiscrete(2)])
    a, b = train(cfg, params, stack), train(cfg, params, stack)
    assert a.curve == b.curve
    assert np.array_equal(a.net.theta, b.net.theta)
    c = train(PpoConfig(n_envs=2, n_steps=32, total_timesteps=256, seed=8), params, stack)
    assert not np.array_equal(a.net.theta, c.net.theta)


@pytest.mark.parametrize("seed", range(5))
def test_bandit_converges(seed):
    result = train(PpoConfig(seed=seed, n_steps=32, total_timesteps=5000), "bandit")
    with ag.no_grad():
        p = result.net.forward(np.ones((1, 1))).probs()[0][0, 1]
    assert p > 0.95
    assert result.curve[-1].mean_return > 0.9
