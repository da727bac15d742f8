"""MLP actor-critic with categorical, factored-categorical and Gaussian heads."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .spaces import ActionSpace, Composite, Continuous, Discrete, MultiDiscrete, primitive_parts

HIDDEN = 64
LOG_2PI = math.log(2 * math.pi)


class ShapeMismatch(ValueError):
    pass


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class HeadLayout:
    """Flattened view of a (shaped) action space.

    Categorical blocks come first in the logits vector, Gaussian means after.
    A batch of actions is a pair ``(cat, real)``: an int array ``(B, len(cat_sizes))``
    and a float array ``(B, n_real)``.
    """

    space: ActionSpace
    cat_sizes: tuple[int, ...]
    real_center: tuple[float, ...]
    real_scale: tuple[float, ...]

    @classmethod
    def from_space(cls, space: ActionSpace) -> "HeadLayout":
        cats, centers, scales = [], [], []
        for part in primitive_parts(space):
            if isinstance(part, Discrete):
                cats.append(part.n)
            elif isinstance(part, MultiDiscrete):
                cats.extend(part.arities)
            else:
                for lo, hi in part.bounds:
                    centers.append((lo + hi) / 2)
                    scales.append((hi - lo) / 2)
        return cls(space, tuple(cats), tuple(centers), tuple(scales))

    @property
    def n_cat(self) -> int:
        return len(self.cat_sizes)

    @property
    def n_real(self) -> int:
        return len(self.real_center)

    @property
    def groups(self) -> tuple[tuple[int, int, int], ...]:
        """Runs of equal-size heads as ``(first head, count, size)``."""
        out = []
        for j, n in enumerate(self.cat_sizes):
            if out and out[-1][2] == n:
                first, count, _ = out[-1]
                out[-1] = (first, count + 1, n)
            else:
                out.append((j, 1, n))
        return tuple(out)

    @property
    def n_logits(self) -> int:
        return sum(self.cat_sizes)

    @property
    def n_out(self) -> int:
        return self.n_logits + self.n_real

    def pack(self, actions) -> tuple[np.ndarray, np.ndarray]:
        """Python actions -> ``(cat, real)`` arrays."""
        cat = np.zeros((len(actions), self.n_cat), dtype=np.int64)
        real = np.zeros((len(actions), self.n_real))
        parts = primitive_parts(self.space)
        composite = isinstance(self.space, Composite)
        for row, action in enumerate(actions):
            ci = ri = 0
            for part, a in zip(parts, action if composite else (action,)):
                if isinstance(part, Discrete):
                    cat[row, ci] = a
                    ci += 1
                elif isinstance(part, MultiDiscrete):
                    cat[row, ci:ci + len(a)] = a
                    ci += len(a)
                else:
                    real[row, ri:ri + len(a)] = a
                    ri += len(a)
        return cat, real

    def unpack(self, cat: np.ndarray, real: np.ndarray) -> list:
        """``(cat, real)`` arrays -> Python actions."""
        out = []
        parts = primitive_parts(self.space)
        for row in range(cat.shape[0]):
            ci = ri = 0
            acts = []
            for part in parts:
                if isinstance(part, Discrete):
                    acts.append(int(cat[row, ci]))
                    ci += 1
                elif isinstance(part, MultiDiscrete):
                    k = len(part.arities)
                    acts.append(tuple(int(x) for x in cat[row, ci:ci + k]))
                    ci += k
                else:
                    acts.append(tuple(float(x) for x in real[row, ri:ri + part.dims]))
                    ri += part.dims
            out.append(tuple(acts) if isinstance(self.space, Composite) else acts[0])
        return out


class Distribution:
    """Per-row action distribution plus the value estimate.

    Consecutive categorical heads of equal size share one ``(B, heads, size)``
    log-probability tensor, so a MultiDiscrete([2] * 32) head costs one op.
    """

    def __init__(self, layout: HeadLayout, groups: list, mean: Optional[Tensor], log_std: Optional[Tensor], value: Tensor):
        self.layout = layout
        self.groups = groups  # list of (first head index, logp Tensor (B, count, size))
        self.mean = mean
        self.log_std = log_std  # (1, n_real), already includes log(scale)
        self.value = value

    @property
    def batch_size(self) -> int:
        return self.value.shape[0]

    def probs(self) -> list[np.ndarray]:
        """One ``(B, n)`` probability array per categorical head."""
        out = []
        for _, logp in self.groups:
            p = np.exp(logp.data)
            out.extend(p[:, j, :] for j in range(p.shape[1]))
        return out

    def log_prob(self, cat: np.ndarray, real: np.ndarray) -> Tensor:
        cat = np.asarray(cat)
        sizes = np.asarray(self.layout.cat_sizes)
        if cat.size and ((cat < 0).any() or (cat >= sizes).any()):
            raise OutOfRange(f"categorical index out of range for head sizes {self.layout.cat_sizes}")
        total = None
        for first, logp in self.groups:
            idx = cat[:, first:first + logp.shape[1]]
            term = ag.sum(ag.gather_last(logp, idx), axis=1)
            total = term if total is None else total + term
        if self.mean is not None:
            inv_std = ag.exp(-self.log_std)
            z = (Tensor(np.asarray(real, dtype=self.mean.data.dtype)) - self.mean) * inv_std
            dens = -0.5 * ag.square(z) - self.log_std - 0.5 * LOG_2PI
            term = ag.sum(dens, axis=1)
            total = term if total is None else total + term
        return total

    def entropy(self) -> Tensor:
        total = None
        for _, logp in self.groups:
            term = ag.sum(ag.categorical_entropy(logp), axis=1)
            total = term if total is None else total + term
        if self.mean is not None:
            term = ag.sum(self.log_std, axis=1) + self.log_std.shape[1] * 0.5 * (1.0 + LOG_2PI)
            # broadcast the state-independent entropy to every row
            term = term + Tensor(np.zeros(self.batch_size, dtype=self.value.data.dtype))
            total = term if total is None else total + term
        return total

    def sample(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        B = self.batch_size
        cat = np.zeros((B, self.layout.n_cat), dtype=np.int64)
        for first, logp in self.groups:
            p = np.exp(logp.data.astype(np.float64))
            count, n = p.shape[1], p.shape[2]
            cdf = np.cumsum(p, axis=2)
            u = rng.random((B, count)) * cdf[:, :, -1]
            idx = (cdf < u[:, :, None]).sum(axis=2)
            # rounding can land on a zero-probability entry; step back to a live one
            picked = np.take_along_axis(p, np.minimum(idx, n - 1)[:, :, None], axis=2)[:, :, 0]
            for r, j in zip(*np.nonzero((idx >= n) | (picked == 0))):
                live = np.flatnonzero(p[r, j] > 0)
                below = live[live <= idx[r, j]]
                idx[r, j] = below[-1] if below.size else live[0]
            cat[:, first:first + count] = idx
        real = np.zeros((B, self.layout.n_real))
        if self.mean is not None:
            std = np.exp(self.log_std.data.astype(np.float64))
            real = self.mean.data.astype(np.float64) + std * rng.standard_normal((B, self.layout.n_real))
        return cat, real


class PolicyNet:
    """Shared tanh trunk, separate policy and value layers, flat parameter vector."""

    def __init__(self, obs_size: int, space: ActionSpace, seed: int = 0, dtype=np.float32, hidden: int = HIDDEN):
        self.obs_size = obs_size
        self.layout = HeadLayout.from_space(space)
        self.dtype = np.dtype(dtype)
        self.hidden = hidden
        n_out = self.layout.n_out
        self.shapes = {
            "w1": (obs_size, hidden),
            "b1": (hidden,),
            "w2": (hidden, hidden),
            "b2": (hidden,),
            "wpi": (hidden, n_out),
            "bpi": (n_out,),
            "wv": (hidden, 1),
            "bv": (1,),
            "log_std": (self.layout.n_real,),
        }
        size = sum(math.prod(s) for s in self.shapes.values())
        self.theta = np.zeros(size, dtype=self.dtype)
        self._init(np.random.default_rng(seed))

    # parameter views -------------------------------------------------------
    def views(self, flat: Optional[np.ndarray] = None) -> dict[str, np.ndarray]:
        flat = self.theta if flat is None else flat
        out, i = {}, 0
        for name, shape in self.shapes.items():
            n = math.prod(shape)
            out[name] = flat[i:i + n].reshape(shape)
            i += n
        return out

    def _init(self, rng):
        v = self.views()
        gains = {"w1": math.sqrt(2), "w2": math.sqrt(2), "wpi": 0.01, "wv": 1.0}
        for name, gain in gains.items():
            rows, cols = self.shapes[name]
            a = rng.standard_normal((max(rows, cols), min(rows, cols)))
            q, r = np.linalg.qr(a)
            q = q * np.sign(np.diag(r))
            if rows < cols:
                q = q.T
            v[name][...] = gain * q[:rows, :cols]

    def astype(self, dtype) -> "PolicyNet":
        other = object.__new__(PolicyNet)
        other.__dict__.update(self.__dict__)
        other.dtype = np.dtype(dtype)
        other.theta = self.theta.astype(dtype)
        return other

    # forward -------------------------------------------------------------
    def forward(self, obs, mask: Optional[np.ndarray] = None, theta: Optional[Tensor] = None) -> Distribution:
        obs = np.asarray(obs, dtype=self.dtype)
        if obs.ndim != 2 or obs.shape[1] != self.obs_size:
            raise ShapeMismatch(f"expected observations of shape (B, {self.obs_size}), got {obs.shape}")
        p = self._param_tensors(theta)
        x = Tensor(obs)
        h = ag.tanh(x @ p["w1"] + p["b1"])
        h = ag.tanh(h @ p["w2"] + p["b2"])
        out = h @ p["wpi"] + p["bpi"]
        value = ag.sum(h @ p["wv"] + p["bv"], axis=1)

        lay = self.layout
        B = obs.shape[0]
        groups, start = [], 0
        for first, count, n in lay.groups:
            width = count * n
            m = None if mask is None else np.asarray(mask)[:, start:start + width].reshape(B, count, n)
            logits = ag.reshape(ag.columns(out, start, start + width), (B, count, n))
            groups.append((first, ag.log_softmax(logits, m)))
            start += width
        mean = log_std = None
        if lay.n_real:
            center = np.asarray(lay.real_center, dtype=self.dtype)
            scale = np.asarray(lay.real_scale, dtype=self.dtype)
            mean = ag.columns(out, start, start + lay.n_real) * scale + center
            log_std = ag.reshape(p["log_std"], (1, -1)) + np.log(scale)
        return Distribution(lay, groups, mean, log_std, value)

    def _param_tensors(self, theta: Optional[Tensor]) -> dict[str, Tensor]:
        if theta is None:
            return {k: Tensor(v) for k, v in self.views().items()}
        return theta  # already a dict of leaf tensors

    # gradients -----------------------------------------------------------
    def gradients(self, loss_fn: Callable[[Distribution], Tensor], obs, mask=None) -> tuple[float, np.ndarray]:
        """Return ``(loss, dloss/dtheta)`` for a scalar loss of the forward outputs."""
        leaves = {k: Tensor(v, requires_grad=True) for k, v in self.views().items()}
        dist = self.forward(obs, mask, theta=leaves)
        loss = loss_fn(dist)
        grad = np.zeros_like(self.theta)
        if loss.requires_grad:
            loss.backward()
            gv = self.views(grad)
            for k, leaf in leaves.items():
                if leaf.grad is not None:
                    gv[k][...] = leaf.grad
        return float(loss.data), grad

    # checkpoint ----------------------------------------------------------
    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.theta.astype("<f4").tofile(path.with_suffix(".bin"))
        meta = {
            "obs_size": self.obs_size,
            "hidden": self.hidden,
            "dtype": "float32-le",
            "layers": [{"name": k, "shape": list(s)} for k, s in self.shapes.items()],
            "heads": {
                "categorical": list(self.layout.cat_sizes),
                "gaussian": {"center": list(self.layout.real_center), "scale": list(self.layout.real_scale)},
            },
        }
        from .spaces import to_json

        meta["action_space"] = to_json(self.layout.space)
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2))

    @classmethod
    def load(cls, path) -> "PolicyNet":
        from .spaces import from_json

        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        net = cls(meta["obs_size"], from_json(meta["action_space"]), hidden=meta["hidden"])
        theta = np.fromfile(path.with_suffix(".bin"), dtype="<f4")
        if theta.shape != net.theta.shape:
            raise ShapeMismatch(f"checkpoint has {theta.size} parameters, expected {net.theta.size}")
        net.theta[...] = theta
        return net


def sample_and_logprob(dist: Distribution, rng: np.random.Generator):
    """Sample a batch of actions. Returns ``(cat, real, log_prob, entropy)`` as arrays."""
    cat, real = dist.sample(rng)
    with ag.no_grad():
        lp = dist.log_prob(cat, real).data
        ent = dist.entropy().data
    return cat, real, lp, ent


def evaluate_logprob(dist: Distribution, cat, real):
    with ag.no_grad():
        return dist.log_prob(cat, real).data, dist.entropy().data


class Adam:
    def __init__(self, size: int, lr: float = 2.5e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8, dtype=np.float64):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size, dtype=dtype)
        self.v = np.zeros(size, dtype=dtype)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray, lr: Optional[float] = None) -> np.ndarray:
        lr = self.lr if lr is None else lr
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        theta -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(theta.dtype)
        return theta


def adam_step(state: Adam, theta: np.ndarray, grad: np.ndarray, lr: Optional[float] = None) -> np.ndarray:
    return state.step(theta, grad, lr)
