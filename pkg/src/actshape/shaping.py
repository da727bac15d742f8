"""Action-space transformations: remove, force, discretize, flatten, mask.

A :class:`TransformStack` is built from an original space and an ordered list
of transforms. The agent acts in ``stack.shaped``; ``stack.decode`` turns a
shaped action back into an action of the original space.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .spaces import (
    ActionSpace,
    Composite,
    Continuous,
    Discrete,
    MultiDiscrete,
    contains,
)

ALL = "all"


class IncompatibleTransform(ValueError):
    """Transform does not fit the space it is applied to."""

    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        if index is not None:
            message = f"transform #{index}: {message}"
        super().__init__(message)


class OutOfRange(ValueError):
    pass


class AllMasked(ValueError):
    pass


# --------------------------------------------------------------------------
# transform descriptions


@dataclass(frozen=True)
class RemoveAction:
    choices: tuple[int, ...]
    dim: Optional[int] = None
    part: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(sorted(set(int(c) for c in self.choices))))


@dataclass(frozen=True)
class ForceAction:
    choice: int
    dim: Optional[int] = None
    part: Optional[int] = None


@dataclass(frozen=True)
class DiscretizeContinuous:
    k: int
    magnitude: float
    dim: int = 0
    part: Optional[int] = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1 or self.k % 2 == 0:
            raise IncompatibleTransform(f"bin count must be a positive odd integer, got {self.k}")
        if not (self.magnitude > 0 and math.isfinite(self.magnitude)):
            raise IncompatibleTransform(f"magnitude must be positive, got {self.magnitude}")


@dataclass(frozen=True)
class FlattenMultiDiscrete:
    max_pressed: Union[int, str] = ALL
    part: Optional[int] = None

    def __post_init__(self):
        mp = self.max_pressed
        if mp != ALL and (isinstance(mp, bool) or not isinstance(mp, int) or mp < 1):
            raise IncompatibleTransform(f"max_pressed must be a positive integer or 'all', got {mp!r}")


@dataclass(frozen=True)
class Mask:
    """Per-step availability. ``source(observation) -> bool array`` over the
    logits of the space the mask is attached to (for MultiDiscrete, the
    per-dimension blocks concatenated)."""

    source: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    name: str = "custom"


Transform = Union[RemoveAction, ForceAction, DiscretizeContinuous, FlattenMultiDiscrete, Mask]


def static_mask(available: Sequence[bool]) -> Mask:
    table = np.asarray(available, dtype=bool)
    table.setflags(write=False)
    return Mask(source=lambda obs: table, name=f"static{table.astype(int).tolist()}")


# --------------------------------------------------------------------------
# combinatorics


def enumerate_combinations(arities: Sequence[int], max_pressed: Union[int, str] = ALL) -> list[tuple[int, ...]]:
    """Joint index tuples with at most ``max_pressed`` non-zero entries.

    Row-major order, so the all-zero (no-op) tuple is always first.
    """
    arities = tuple(int(a) for a in arities)
    if max_pressed == ALL or max_pressed >= len(arities):
        return list(itertools.product(*(range(a) for a in arities)))
    out = []
    for combo in itertools.product(*(range(a) for a in arities)):
        if sum(1 for c in combo if c) <= max_pressed:
            out.append(combo)
    return out


def mask_probabilities(probs: Sequence[float], available: Sequence[bool]) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    available = np.asarray(available, dtype=bool)
    if probs.shape != available.shape:
        raise ValueError(f"length mismatch: {probs.shape} vs {available.shape}")
    if not available.any():
        raise AllMasked("no action is available")
    out = np.where(available, probs, 0.0)
    total = out.sum()
    if total <= 0.0:
        out = available / available.sum()
    else:
        out = out / total
    out[~available] = 0.0
    return out


# --------------------------------------------------------------------------
# per-transform steps. Each returns (shaped space, decode function)


def _resolve(space: ActionSpace, t, index: int):
    """Select the part of a Composite a transform addresses."""
    if isinstance(space, Composite):
        if t.part is None or not 0 <= t.part < len(space.parts):
            raise IncompatibleTransform(f"composite space needs a valid 'part' (0..{len(space.parts) - 1})", index)
        return space.parts[t.part]
    if getattr(t, "part", None) not in (None, 0):
        raise IncompatibleTransform(f"'part' given but space {space!r} is not composite", index)
    return space


def _drop_dim(arities: tuple[int, ...], dim: int, pinned: int):
    rest = arities[:dim] + arities[dim + 1:]
    shaped = MultiDiscrete(rest) if rest else Discrete(1)

    def decode(a):
        a = () if not rest else tuple(a)
        return a[:dim] + (pinned,) + a[dim:]

    return shaped, decode


def _remove(space, t: RemoveAction, index: int):
    if isinstance(space, Discrete):
        if t.dim not in (None, 0):
            raise IncompatibleTransform("Discrete space has no sub-action dims", index)
        n = space.n
        bad = [c for c in t.choices if not 0 <= c < n]
        if bad:
            raise IncompatibleTransform(f"choices {bad} out of range for {space!r}", index)
        kept = tuple(c for c in range(n) if c not in t.choices)
        if not kept:
            raise IncompatibleTransform("cannot remove every choice", index)
        return Discrete(len(kept)), lambda a: kept[a]
    if isinstance(space, MultiDiscrete):
        if t.dim is None or not 0 <= t.dim < len(space.arities):
            raise IncompatibleTransform(f"need dim in 0..{len(space.arities) - 1}", index)
        n = space.arities[t.dim]
        bad = [c for c in t.choices if not 0 <= c < n]
        if bad:
            raise IncompatibleTransform(f"choices {bad} out of range for dim {t.dim} (arity {n})", index)
        kept = tuple(c for c in range(n) if c not in t.choices)
        if not kept:
            raise IncompatibleTransform("cannot remove every choice", index)
        if len(kept) == 1:
            # a single remaining choice is the same as forcing it
            return _drop_dim(space.arities, t.dim, kept[0])
        dim = t.dim
        arities = space.arities[:dim] + (len(kept),) + space.arities[dim + 1:]

        def decode(a):
            a = tuple(a)
            return a[:dim] + (kept[a[dim]],) + a[dim + 1:]

        return MultiDiscrete(arities), decode
    raise IncompatibleTransform(f"RemoveAction needs a Discrete or MultiDiscrete space, got {space!r}", index)


def _force(space, t: ForceAction, index: int):
    if isinstance(space, Discrete):
        if t.dim not in (None, 0):
            raise IncompatibleTransform("Discrete space has no sub-action dims", index)
        if not 0 <= t.choice < space.n:
            raise IncompatibleTransform(f"forced choice {t.choice} out of range for {space!r}", index)
        choice = int(t.choice)
        return Discrete(1), lambda a: choice
    if isinstance(space, MultiDiscrete):
        if t.dim is None or not 0 <= t.dim < len(space.arities):
            raise IncompatibleTransform(f"need dim in 0..{len(space.arities) - 1}", index)
        if not 0 <= t.choice < space.arities[t.dim]:
            raise IncompatibleTransform(f"forced choice {t.choice} out of range for dim {t.dim}", index)
        return _drop_dim(space.arities, t.dim, int(t.choice))
    raise IncompatibleTransform(f"ForceAction needs a Discrete or MultiDiscrete space, got {space!r}", index)


def bin_values(k: int, magnitude: float) -> tuple[float, ...]:
    """Equally spaced values from -magnitude to +magnitude; the middle one is exactly 0."""
    if k == 1:
        return (0.0,)
    half = (k - 1) // 2
    return tuple(magnitude * (2 * b / (k - 1) - 1) if b != half else 0.0 for b in range(k))


def _discretize(space, t: DiscretizeContinuous, index: int):
    if not isinstance(space, Continuous):
        raise IncompatibleTransform(f"DiscretizeContinuous needs a Continuous space, got {space!r}", index)
    if not 0 <= t.dim < space.dims:
        raise IncompatibleTransform(f"dim {t.dim} out of range for {space!r}", index)
    values = bin_values(t.k, t.magnitude)
    lo, hi = space.bounds[t.dim]
    if values[0] < lo or values[-1] > hi:
        raise IncompatibleTransform(f"bins span [{values[0]}, {values[-1]}] outside bounds [{lo}, {hi}]", index)
    dim = t.dim
    if space.dims == 1:
        return Discrete(t.k), lambda a: (values[a],)
    rest = Continuous(space.dims - 1, space.bounds[:dim] + space.bounds[dim + 1:])

    def decode(a):
        reals, b = a
        reals = tuple(reals)
        return reals[:dim] + (values[b],) + reals[dim:]

    return Composite((rest, Discrete(t.k))), decode


def _flatten(space, t: FlattenMultiDiscrete, index: int):
    if not isinstance(space, MultiDiscrete):
        raise IncompatibleTransform(f"FlattenMultiDiscrete needs a MultiDiscrete space, got {space!r}", index)
    table = tuple(enumerate_combinations(space.arities, t.max_pressed))
    return Discrete(len(table)), lambda a: table[a]


_STEPS = {
    RemoveAction: _remove,
    ForceAction: _force,
    DiscretizeContinuous: _discretize,
    FlattenMultiDiscrete: _flatten,
}


def _apply_one(space: ActionSpace, t, index: int):
    step = _STEPS.get(type(t))
    if step is None:
        raise IncompatibleTransform(f"unknown transform {t!r}", index)
    target = _resolve(space, t, index)
    shaped_part, decode_part = step(target, t, index)
    if not isinstance(space, Composite):
        return shaped_part, decode_part
    p = t.part
    parts = space.parts[:p] + (shaped_part,) + space.parts[p + 1:]
    shaped = Composite(parts)
    # a composite shaped part is spliced in flat; remember its width
    width = len(shaped_part.parts) if isinstance(shaped_part, Composite) else 1

    def decode(a):
        a = tuple(a)
        inner = a[p:p + width] if width > 1 else a[p]
        return a[:p] + (decode_part(inner),) + a[p + width:]

    return shaped, decode


# --------------------------------------------------------------------------


def _fits(space: ActionSpace, action) -> bool:
    """Like ``contains`` but continuous parts only need finite reals.

    Gaussian policies sample outside the bounds; clipping or wrapping is left
    to whoever consumes the decoded action.
    """
    if isinstance(space, Continuous):
        try:
            vals = tuple(action)
            return len(vals) == space.dims and all(math.isfinite(float(v)) for v in vals)
        except (TypeError, ValueError):
            return False
    if isinstance(space, Composite):
        try:
            action = tuple(action)
        except TypeError:
            return False
        return len(action) == len(space.parts) and all(_fits(p, a) for p, a in zip(space.parts, action))
    return contains(space, action)


class TransformStack:
    """Original space + transforms; immutable after construction."""

    def __init__(self, original: ActionSpace, transforms: Sequence[Transform] = ()):
        self.original = original
        self.transforms = tuple(transforms)
        decoders = []
        masks: list[Mask] = []
        space = original
        for i, t in enumerate(self.transforms):
            if isinstance(t, Mask):
                if not isinstance(space, (Discrete, MultiDiscrete)):
                    raise IncompatibleTransform(f"Mask needs a Discrete or MultiDiscrete space, got {space!r}", i)
                masks.append(t)
                continue
            if masks:
                raise IncompatibleTransform("space-changing transform after a Mask", i)
            space, dec = _apply_one(space, t, i)
            decoders.append(dec)
        self.shaped = space
        self._decoders = tuple(reversed(decoders))
        self._masks = tuple(masks)

    @property
    def masked(self) -> bool:
        return bool(self._masks)

    def decode(self, action):
        if not _fits(self.shaped, action):
            raise OutOfRange(f"{action!r} is not in {self.shaped!r}")
        if isinstance(self.shaped, MultiDiscrete):
            action = tuple(int(a) for a in action)
        elif isinstance(self.shaped, Discrete):
            action = int(action)
        for dec in self._decoders:
            action = dec(action)
        return action

    def availability(self, observation) -> Optional[np.ndarray]:
        """Combined availability over the shaped logits, or None when unmasked."""
        if not self._masks:
            return None
        width = self.shaped.n if isinstance(self.shaped, Discrete) else sum(self.shaped.arities)
        avail = np.ones(width, dtype=bool)
        for m in self._masks:
            a = np.asarray(m.source(observation), dtype=bool)
            if a.shape != (width,):
                raise IncompatibleTransform(f"mask {m.name} returned shape {a.shape}, expected ({width},)")
            avail &= a
        return avail

    def __repr__(self):
        return f"TransformStack({self.original!r} -> {self.shaped!r}, {len(self.transforms)} transforms)"


def apply(original: ActionSpace, transforms: Sequence[Transform]) -> TransformStack:
    return TransformStack(original, transforms)


def decode(stack: TransformStack, shaped_action):
    return stack.decode(shaped_action)


def guide(space: ActionSpace, keep: Optional[dict] = None, bins: int = 3, magnitude: Optional[float] = None) -> list:
    """Transforms that follow the usual shaping advice for a new environment.

    Drops every choice not listed in ``keep`` (``{dim: [choices]}``; for a
    Discrete space use key ``None``), discretizes continuous dims into
    ``bins`` values and leaves MultiDiscrete spaces factored.
    """
    keep = keep or {}
    out: list = []
    parts = space.parts if isinstance(space, Composite) else (space,)
    composite = isinstance(space, Composite)
    # iterate parts right-to-left so earlier part indices stay valid
    for pi in reversed(range(len(parts))):
        part = parts[pi]
        p = pi if composite else None
        if isinstance(part, Discrete) and None in keep:
            out.append(RemoveAction(tuple(c for c in range(part.n) if c not in keep[None]), part=p))
        elif isinstance(part, MultiDiscrete):
            for dim in sorted((d for d in keep if d is not None), reverse=True):
                drop = tuple(c for c in range(part.arities[dim]) if c not in keep[dim])
                if drop:
                    out.append(RemoveAction(drop, dim=dim, part=p))
        elif isinstance(part, Continuous):
            for dim in reversed(range(part.dims)):
                lo, hi = part.bounds[dim]
                mag = magnitude if magnitude is not None else min(-lo, hi)
                if mag <= 0:
                    raise IncompatibleTransform(f"cannot centre bins on 0 within [{lo}, {hi}]")
                out.append(DiscretizeContinuous(bins, mag, dim=dim, part=p))
                if dim:
                    # splitting a dim off produces a composite; follow-ups address its first part
                    p = 0 if not composite else p
    return out
