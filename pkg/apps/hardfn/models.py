"""
Models do app hardfn: a instância f_k e o operador de diferenças A_k.
"""

from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from apps.core.exceptions import ConfigurationError
from apps.core.vectors import Vector

NORM_ITERATIONS = 200


class HardForm(StrEnum):
    """Duas formas equivalentes de avaliar f_k."""

    EXPLICIT = "explicit"  # soma de potências das diferenças
    FACTORED = "factored"  # η_{p+ν}(A_k x) − ⟨e_1, x⟩


@dataclass(frozen=True)
class BandedDifference:
    """(A_k x)_i = x_i − x_{i+1} para i < k e x_i para i ≥ k (índices 1-based)."""

    k: int
    n: int

    def apply(self, x: Vector) -> np.ndarray:
        u = np.array(x, dtype=np.float64)
        u[: self.k - 1] -= x[1 : self.k]
        return u

    def apply_transpose(self, u: np.ndarray) -> np.ndarray:
        y = np.array(u, dtype=np.float64)
        y[1 : self.k] -= u[: self.k - 1]
        return y

    def operator_norm(self, iterations: int = NORM_ITERATIONS, seed: int = 0) -> float:
        """‖A_k‖ por iteração de potência sobre A_kᵀA_k."""
        rng = np.random.default_rng(seed)
        z = rng.standard_normal(self.n)
        z /= np.linalg.norm(z)
        sigma2 = 0.0
        for _ in range(iterations):
            w = self.apply_transpose(self.apply(z))
            sigma2 = float(np.linalg.norm(w))
            if sigma2 == 0.0:
                break
            z = w / sigma2
        return float(np.sqrt(sigma2))


@dataclass(frozen=True)
class HardInstance:
    """
    f_k(x) = (1/(p+ν))[Σ_{i<k}|x_i − x_{i+1}|^{p+ν} + Σ_{i≥k}|x_i|^{p+ν}] − x_1 em ℝⁿ.
    """

    n: int
    k: int
    p: int = 2
    nu: float = 1.0

    def __post_init__(self):
        if not 2 <= self.k <= self.n:
            raise ConfigurationError(f"k deve estar em [2, n]; recebeu k={self.k}, n={self.n}.")
        if self.p < 2:
            raise ConfigurationError(f"p deve ser ≥ 2, recebeu {self.p}.")
        if not 0.0 <= self.nu <= 1.0:
            raise ConfigurationError(f"ν deve estar em [0, 1], recebeu {self.nu}.")

    @property
    def q(self) -> float:
        """Expoente p + ν."""
        return self.p + self.nu

    @property
    def operator(self) -> BandedDifference:
        return BandedDifference(k=self.k, n=self.n)
