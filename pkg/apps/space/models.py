"""
Models do app space.
Espaço euclidiano finito com métrica B autoadjunta e definida positiva.
"""

from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from apps.core.exceptions import ConfigurationError
from apps.core.vectors import DualVector, Vector, as_vector


class MetricKind(StrEnum):
    """Representações suportadas do operador B."""

    IDENTITY = "identity"
    DIAGONAL = "diagonal"
    DENSE = "dense"


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """
    Espaço (E, B). Imutável após a construção; pode ser compartilhado entre execuções.

    Para DENSE o fator de Cholesky é calculado uma vez e reaproveitado em toda
    aplicação de B⁻¹.
    """

    dim: int
    kind: MetricKind = MetricKind.IDENTITY
    diag: np.ndarray | None = None
    matrix: np.ndarray | None = None
    _cho: tuple | None = field(default=None, repr=False)

    # ------------------------------------------------------------------
    # Construtores
    # ------------------------------------------------------------------
    @classmethod
    def identity(cls, dim: int) -> "MetricSpace":
        if dim < 1:
            raise ConfigurationError(f"Dimensão inválida: {dim}.")
        return cls(dim=dim)

    @classmethod
    def diagonal(cls, entries) -> "MetricSpace":
        d = as_vector(entries, name="diag")
        if np.any(d <= 0):
            raise ConfigurationError("Métrica diagonal exige entradas positivas.")
        d.setflags(write=False)
        return cls(dim=d.shape[0], kind=MetricKind.DIAGONAL, diag=d)

    @classmethod
    def dense(cls, matrix) -> "MetricSpace":
        B = np.array(matrix, dtype=np.float64)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ConfigurationError(f"B deve ser quadrada, recebeu shape {B.shape}.")
        if not np.all(np.isfinite(B)):
            raise ConfigurationError("B contém NaN/Inf.")
        if not np.allclose(B, B.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(B).max())):
            raise ConfigurationError("B não é simétrica.")
        B = 0.5 * (B + B.T)
        try:
            cho = cho_factor(B, lower=True, check_finite=False)
        except LinAlgError as exc:
            raise ConfigurationError("B não é definida positiva (Cholesky falhou).") from exc
        B.setflags(write=False)
        return cls(dim=B.shape[0], kind=MetricKind.DENSE, matrix=B, _cho=cho)

    # ------------------------------------------------------------------
    # Operadores
    # ------------------------------------------------------------------
    def apply(self, x: Vector) -> DualVector:
        """Bx."""
        if self.kind == MetricKind.IDENTITY:
            return np.array(x, dtype=np.float64)
        if self.kind == MetricKind.DIAGONAL:
            return self.diag * x
        return self.matrix @ x

    def solve(self, s: DualVector) -> Vector:
        """B⁻¹s."""
        if self.kind == MetricKind.IDENTITY:
            return np.array(s, dtype=np.float64)
        if self.kind == MetricKind.DIAGONAL:
            return s / self.diag
        return cho_solve(self._cho, s, check_finite=False)

    def as_matrix(self) -> np.ndarray:
        """B como matriz densa (usado pelo solver secular)."""
        if self.kind == MetricKind.IDENTITY:
            return np.eye(self.dim)
        if self.kind == MetricKind.DIAGONAL:
            return np.diag(self.diag)
        return np.array(self.matrix)
