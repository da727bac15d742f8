import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actshape.spaces import (
    INFINITE,
    Composite,
    Continuous,
    Discrete,
    MultiDiscrete,
    SpaceError,
    cardinality,
    contains,
    from_json,
    sample_uniform,
    to_json,
)

# strategies ------------------------------------------------------------------

discrete = st.integers(1, 12).map(Discrete)
multi = st.lists(st.integers(2, 5), min_size=1, max_size=5).map(lambda a: MultiDiscrete(tuple(a)))


@st.composite
def continuous(draw):
    dims = draw(st.integers(1, 3))
    bounds = []
    for _ in range(dims):
        lo = draw(st.floats(-100, 100))
        width = draw(st.floats(0.01, 50))
        bounds.append((lo, lo + width))
    return Continuous(dims, tuple(bounds))


primitive = st.one_of(discrete, multi, continuous())
spaces = st.one_of(primitive, st.lists(primitive, min_size=1, max_size=3).map(lambda p: Composite(tuple(p))))


# contains ----------------------------------------------------------------------


def test_contains_examples():
    assert contains(Discrete(4), 3)
    assert not contains(Discrete(4), 4)
    assert contains(MultiDiscrete((3, 3)), (2, 0))
    assert contains(MultiDiscrete((3, 3)), [2, 0])


@pytest.mark.parametrize(
    "space, action",
    [
        (Discrete(4), -1),
        (Discrete(4), 1.0),
        (Discrete(4), True),
        (Discrete(4), "1"),
        (MultiDiscrete((3, 3)), (3, 0)),
        (MultiDiscrete((3, 3)), (1,)),
        (MultiDiscrete((3, 3)), 1),
        (Continuous(1, ((-1, 1),)), (1.5,)),
        (Continuous(1, ((-1, 1),)), (float("nan"),)),
        (Continuous(1, ((-1, 1),)), 0.5),
        (Composite((Discrete(2), Continuous(1, ((0, 1),)))), (1,)),
        (Composite((Discrete(2), Continuous(1, ((0, 1),)))), (2, (0.5,))),
    ],
)
def test_contains_rejects(space, action):
    assert contains(space, action) is False


def test_contains_accepts_numpy_scalars():
    assert contains(Discrete(3), np.int64(2))
    assert contains(Continuous(1, ((0, 1),)), (np.float32(0.5),))


# cardinality --------------------------------------------------------------------


def test_cardinality_examples():
    assert cardinality(MultiDiscrete((3, 3, 2, 3))) == 54
    assert cardinality(Discrete(1)) == 1
    assert cardinality(Composite((Discrete(6), Continuous(1, ((0, 1),))))) == INFINITE
    assert cardinality(Composite((Discrete(6), MultiDiscrete((2, 3))))) == 36


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(2, 4), min_size=1, max_size=8))
def test_cardinality_matches_brute_force(arities):
    brute = sum(1 for _ in itertools.product(*(range(a) for a in arities)))
    assert cardinality(MultiDiscrete(tuple(arities))) == brute


# sampling -------------------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(spaces, st.integers(0, 2**32 - 1))
def test_samples_are_members(space, seed):
    rng = np.random.default_rng(seed)
    for _ in range(5):
        assert contains(space, sample_uniform(space, rng))


def test_discrete_one_always_zero():
    rng = np.random.default_rng(0)
    assert {sample_uniform(Discrete(1), rng) for _ in range(100)} == {0}


def test_multidiscrete_sampling_is_uniform():
    rng = np.random.default_rng(1)
    n = 100_000
    counts = {}
    for _ in range(n):
        a = sample_uniform(MultiDiscrete((2, 2)), rng)
        counts[a] = counts.get(a, 0) + 1
    assert set(counts) == {(0, 0), (0, 1), (1, 0), (1, 1)}
    for c in counts.values():
        assert abs(c / n - 0.25) <= 0.02
    # chi-square with 3 dof; 16.27 is the 0.001 critical value
    chi2 = sum((c - n / 4) ** 2 / (n / 4) for c in counts.values())
    assert chi2 < 16.27


def test_continuous_sampling_mean():
    rng = np.random.default_rng(2)
    draws = [sample_uniform(Continuous(1, ((-1, 1),)), rng)[0] for _ in range(100_000)]
    assert abs(np.mean(draws)) <= 0.01


# construction --------------------------------------------------------------------


@pytest.mark.parametrize(
    "build",
    [
        lambda: Discrete(0),
        lambda: Discrete(2.5),
        lambda: MultiDiscrete(()),
        lambda: MultiDiscrete((2, 1)),
        lambda: Continuous(1, ((1, 1),)),
        lambda: Continuous(1, ((0, math.inf),)),
        lambda: Continuous(2, ((0, 1),)),
        lambda: Composite(()),
        lambda: Composite((3,)),
    ],
)
def test_invalid_spaces(build):
    with pytest.raises(SpaceError):
        build()


def test_composite_flattens():
    inner = Composite((Discrete(2), MultiDiscrete((2, 2))))
    outer = Composite((inner, Continuous(1, ((0, 1),))))
    assert outer.parts == (Discrete(2), MultiDiscrete((2, 2)), Continuous(1, ((0, 1),)))
    assert Composite((outer,)) == outer


def test_spaces_are_immutable():
    d = Discrete(3)
    with pytest.raises(AttributeError):
        d.n = 4


# json ---------------------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(spaces)
def test_json_round_trip(space):
    assert from_json(to_json(space)) == space


@pytest.mark.parametrize(
    "obj",
    [
        {"type": "discrete"},
        {"type": "discrete", "n": 3, "extra": 1},
        {"type": "box", "n": 3},
        {"type": "multidiscrete", "arities": [1]},
        {"n": 3},
        {"type": "continuous", "dims": 1, "bounds": [[0]]},
    ],
)
def test_json_rejects_malformed(obj):
    with pytest.raises(SpaceError):
        from_json(obj)
