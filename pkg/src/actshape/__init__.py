"""Action-space shaping for reinforcement learning.

Spaces and shaping transforms, the Get-To-Goal environment family, a small
numpy PPO trainer and an experiment harness for comparing control schemes.
"""
from .spaces import Composite, Continuous, Discrete, MultiDiscrete, SpaceError, cardinality
from .shaping import (
    DiscretizeContinuous,
    FlattenMultiDiscrete,
    ForceAction,
    Mask,
    RemoveAction,
    TransformStack,
)
from .ppo import PpoConfig, train

__version__ = "0.1.0"

__all__ = [
    "Composite",
    "Continuous",
    "Discrete",
    "DiscretizeContinuous",
    "FlattenMultiDiscrete",
    "ForceAction",
    "Mask",
    "MultiDiscrete",
    "PpoConfig",
    "RemoveAction",
    "SpaceError",
    "TransformStack",
    "cardinality",
    "train",
]
