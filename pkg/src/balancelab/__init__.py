"""Constructed solutions of scalar balance laws and checks of their source notions."""

from .field import CANTOR_INVERSE, CANTOR_PARAM, CUBIC_ROOT, NON_DIFF, SCENARIOS, build_field
from .regions import FIVE, FOUR, build_tree, level_params

__all__ = [
    "CANTOR_INVERSE",
    "CANTOR_PARAM",
    "CUBIC_ROOT",
    "NON_DIFF",
    "SCENARIOS",
    "FIVE",
    "FOUR",
    "build_field",
    "build_tree",
    "level_params",
]
__version__ = "0.1.0"
