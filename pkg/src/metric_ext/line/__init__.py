"""Extensions of near-isometries of the line: permutations, flips, spirals."""

from .extension import LineExtensionMap, Piece, Portals, build_line_extension, line_eval
from .permutations import (
    FlipSequence,
    PatternWitness,
    Permutation,
    apply_flips,
    contains_forbidden_pattern,
    flip_decomposition,
    map_permutation,
)
from .spiral import ConjugatedSpiral, Spiral, conjugated_spiral, portal_positions, spiral_angle, spiral_eval

__all__ = [
    "ConjugatedSpiral",
    "FlipSequence",
    "LineExtensionMap",
    "PatternWitness",
    "Permutation",
    "Piece",
    "Portals",
    "Spiral",
    "apply_flips",
    "build_line_extension",
    "conjugated_spiral",
    "contains_forbidden_pattern",
    "flip_decomposition",
    "line_eval",
    "map_permutation",
    "portal_positions",
    "spiral_angle",
    "spiral_eval",
]
