"""Gyrobs utilities."""

from .matrix_lie import (
    LieAlgebraError,
    exp_so3,
    frobenius_inner,
    hat,
    lambda_min_sym,
    polar_rotation_factor,
    random_rotation,
    sym_skew_split,
    vee,
)

__all__ = [
    "LieAlgebraError",
    "exp_so3",
    "frobenius_inner",
    "hat",
    "lambda_min_sym",
    "polar_rotation_factor",
    "random_rotation",
    "sym_skew_split",
    "vee",
]
