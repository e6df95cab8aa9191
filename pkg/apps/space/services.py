"""
Services do app space: normas conjugadas e pareamento.
"""

import math

import numpy as np

from apps.core.vectors import DualVector, Vector, as_vector, check_same_dim
from apps.space.models import MetricSpace


def primal_norm(space: MetricSpace, x: Vector) -> float:
    """‖x‖ = ⟨Bx, x⟩^{1/2}."""
    x = as_vector(x, space.dim)
    return math.sqrt(max(float(np.dot(space.apply(x), x)), 0.0))


def dual_norm(space: MetricSpace, s: DualVector) -> float:
    """‖s‖* = ⟨s, B⁻¹s⟩^{1/2}."""
    s = as_vector(s, space.dim, name="s")
    return math.sqrt(max(float(np.dot(s, space.solve(s))), 0.0))


def pairing(s: DualVector, x: Vector) -> float:
    """⟨s, x⟩ = Σ s_i x_i."""
    s = as_vector(s, name="s")
    x = as_vector(x)
    check_same_dim(s, x)
    return float(np.dot(s, x))
