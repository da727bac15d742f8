"""Action-space algebra.

Actions are plain Python values:

* ``Discrete``      -> ``int``
* ``MultiDiscrete`` -> ``tuple[int, ...]``
* ``Continuous``    -> ``tuple[float, ...]``
* ``Composite``     -> ``tuple`` of part actions
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

INFINITE = "infinite"


class SpaceError(ValueError):
    pass


@dataclass(frozen=True)
class Discrete:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise SpaceError(f"Discrete needs n >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    def __repr__(self):
        return f"Discrete({self.n})"


@dataclass(frozen=True)
class MultiDiscrete:
    arities: tuple[int, ...]

    def __post_init__(self):
        arities = tuple(int(a) for a in self.arities)
        if not arities:
            raise SpaceError("MultiDiscrete needs at least one dimension")
        if any(a < 2 for a in arities):
            raise SpaceError(f"MultiDiscrete arities must be >= 2, got {arities}")
        object.__setattr__(self, "arities", arities)

    def __repr__(self):
        return f"MultiDiscrete({list(self.arities)})"


@dataclass(frozen=True)
class Continuous:
    dims: int
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if int(self.dims) != self.dims or self.dims < 1:
            raise SpaceError(f"Continuous needs dims >= 1, got {self.dims!r}")
        try:
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        except (TypeError, ValueError):
            raise SpaceError(f"bounds must be (low, high) pairs, got {self.bounds!r}") from None
        if len(bounds) != self.dims:
            raise SpaceError(f"expected {self.dims} bounds, got {len(bounds)}")
        for lo, hi in bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise SpaceError(f"invalid bound ({lo}, {hi})")
        object.__setattr__(self, "dims", int(self.dims))
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def uniform(cls, dims: int, low: float, high: float) -> "Continuous":
        return cls(dims, ((low, high),) * dims)

    def __repr__(self):
        return f"Continuous({self.dims}, {[list(b) for b in self.bounds]})"


@dataclass(frozen=True)
class Composite:
    parts: tuple["ActionSpace", ...]

    def __post_init__(self):
        flat: list = []
        for part in self.parts:
            if isinstance(part, Composite):
                flat.extend(part.parts)
            elif isinstance(part, (Discrete, MultiDiscrete, Continuous)):
                flat.append(part)
            else:
                raise SpaceError(f"not an action space: {part!r}")
        if not flat:
            raise SpaceError("Composite needs at least one part")
        object.__setattr__(self, "parts", tuple(flat))

    def __repr__(self):
        return f"Composite({list(self.parts)})"


ActionSpace = Union[Discrete, MultiDiscrete, Continuous, Composite]


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, (bool, np.bool_))


def contains(space: ActionSpace, action: Any) -> bool:
    """Structural and numeric membership test. Never raises."""
    try:
        if isinstance(space, Discrete):
            return _is_int(action) and 0 <= action < space.n
        if isinstance(space, MultiDiscrete):
            action = tuple(action)
            return len(action) == len(space.arities) and all(
                _is_int(a) and 0 <= a < n for a, n in zip(action, space.arities)
            )
        if isinstance(space, Continuous):
            action = tuple(action)
            return len(action) == space.dims and all(
                isinstance(x, (int, float, np.integer, np.floating))
                and not isinstance(x, (bool, np.bool_))
                and lo <= x <= hi
                for x, (lo, hi) in zip(action, space.bounds)
            )
        if isinstance(space, Composite):
            action = tuple(action)
            return len(action) == len(space.parts) and all(
                contains(p, a) for p, a in zip(space.parts, action)
            )
    except TypeError:
        return False
    return False


def cardinality(space: ActionSpace) -> int | str:
    """Number of distinct actions, or ``"infinite"``."""
    if isinstance(space, Discrete):
        return space.n
    if isinstance(space, MultiDiscrete):
        return math.prod(space.arities)
    if isinstance(space, Continuous):
        return INFINITE
    total = 1
    for part in space.parts:
        c = cardinality(part)
        if c == INFINITE:
            return INFINITE
        total *= c
    return total


def sample_uniform(space: ActionSpace, rng: np.random.Generator):
    if isinstance(space, Discrete):
        return int(rng.integers(space.n))
    if isinstance(space, MultiDiscrete):
        return tuple(int(rng.integers(n)) for n in space.arities)
    if isinstance(space, Continuous):
        return tuple(float(rng.uniform(lo, hi)) for lo, hi in space.bounds)
    return tuple(sample_uniform(p, rng) for p in space.parts)


def primitive_parts(space: ActionSpace) -> tuple:
    return space.parts if isinstance(space, Composite) else (space,)


def to_json(space: ActionSpace) -> dict:
    if isinstance(space, Discrete):
        return {"type": "discrete", "n": space.n}
    if isinstance(space, MultiDiscrete):
        return {"type": "multidiscrete", "arities": list(space.arities)}
    if isinstance(space, Continuous):
        return {"type": "continuous", "dims": space.dims, "bounds": [list(b) for b in space.bounds]}
    return {"type": "composite", "parts": [to_json(p) for p in space.parts]}


def from_json(obj: dict) -> ActionSpace:
    try:
        kind = obj["type"]
        keys = set(obj) - {"type"}
        expected = {
            "discrete": {"n"},
            "multidiscrete": {"arities"},
            "continuous": {"dims", "bounds"},
            "composite": {"parts"},
        }.get(kind)
        if expected is None:
            raise SpaceError(f"unknown space type {kind!r}")
        if keys != expected:
            raise SpaceError(f"{kind} space expects keys {sorted(expected)}, got {sorted(keys)}")
        if kind == "discrete":
            return Discrete(obj["n"])
        if kind == "multidiscrete":
            return MultiDiscrete(tuple(obj["arities"]))
        if kind == "continuous":
            return Continuous(obj["dims"], tuple(tuple(b) for b in obj["bounds"]))
        return Composite(tuple(from_json(p) for p in obj["parts"]))
    except (KeyError, TypeError) as exc:
        raise SpaceError(f"malformed space description {obj!r}") from exc
