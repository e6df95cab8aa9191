"""
Helpers de vetores.
Vetores primais e duais são np.ndarray 1-D float64; a distinção é semântica.
"""

import numpy as np
from numpy.typing import ArrayLike, NDArray

from apps.core.exceptions import DimensionMismatchError, NumericalError

Vector = NDArray[np.float64]
DualVector = NDArray[np.float64]


def as_vector(values: ArrayLike, dim: int | None = None, name: str = "x") -> Vector:
    """Converte para vetor 1-D finito, checando a dimensão quando informada."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} deve ser 1-D, recebeu shape {arr.shape}.")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(f"{name} tem dimensão {arr.shape[0]}, esperado {dim}.")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contém NaN/Inf.")
    return arr


def check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Dimensões incompatíveis: {a.shape} e {b.shape}.")
