"""Rotation numbers and dynamics of finitely generated groups of circle maps."""

from .core import (Arc, BumpField, BumpFlowTime, Compose, Conjugate, GroupPresentation, Lift,
                   Mobius, PerturbedRotation, Rotation, group_from_dict, map_from_dict)
from .rotation import detect_rational, rotation_number, translation_number

__version__ = "0.1.0"

__all__ = [
    "Arc", "BumpField", "BumpFlowTime", "Compose", "Conjugate", "GroupPresentation", "Lift",
    "Mobius", "PerturbedRotation", "Rotation", "group_from_dict", "map_from_dict",
    "detect_rational", "rotation_number", "translation_number",
]
