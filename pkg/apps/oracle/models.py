"""
Models do app oracle.

DerivativeOracle é o contrato de qualquer função objetivo; TaylorModel e
RegularizedModel são fotografias imutáveis do modelo de ordem p num centro.
"""

import math
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from apps.core.exceptions import ConfigurationError, UnsupportedOrderError
from apps.core.vectors import DualVector, Vector
from apps.space.models import MetricSpace

SUPPORTED_ORDERS = (2, 3)


@dataclass(frozen=True)
class HolderHint:
    """Par (ν, H_f) conhecido analiticamente."""

    nu: float
    constant: float


@runtime_checkable
class DerivativeOracle(Protocol):
    """
    Fornecedor de f, ∇f e derivadas direcionais até a ordem p.

    hessian_apply(x, h) devolve D²f(x)[h, ·]; third_apply(x, h) devolve
    D³f(x)[h, h, ·] e só é exigido quando order == 3. Implementações devem ser
    puras e reentrantes.
    """

    dim: int
    order: int
    holder_hint: HolderHint | None

    def value(self, x: Vector) -> float: ...

    def gradient(self, x: Vector) -> DualVector: ...

    def hessian_apply(self, x: Vector, h: Vector) -> DualVector: ...

    def third_apply(self, x: Vector, h: Vector) -> DualVector: ...


@dataclass(frozen=True)
class SmoothnessParams:
    """ν e o expoente α do regularizador: α = ν se ν é conhecido, senão α = 1."""

    nu: float
    nu_known: bool = True
    alpha: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.nu <= 1.0:
            raise ConfigurationError(f"ν deve estar em [0, 1], recebeu {self.nu}.")
        object.__setattr__(self, "alpha", float(self.nu) if self.nu_known else 1.0)

    @classmethod
    def universal(cls, nu: float = 1.0) -> "SmoothnessParams":
        """Modo universal: ν desconhecido, α = 1."""
        return cls(nu=nu, nu_known=False)


@dataclass(frozen=True, eq=False)
class TaylorModel:
    """Φ_{x,p}: polinômio de Taylor de grau p em torno de center."""

    oracle: DerivativeOracle
    center: Vector
    degree: int
    f0: float
    g0: DualVector

    def __post_init__(self):
        if self.degree not in SUPPORTED_ORDERS:
            raise UnsupportedOrderError(f"Ordem p={self.degree} não suportada (use 2 ou 3).")


@dataclass(frozen=True, eq=False)
class RegularizedModel:
    """Ω^{(α)}_{x,p,H}(y) = Φ_{x,p}(y) + (H/p!)‖y − x‖^{p+α}."""

    taylor: TaylorModel
    H: float
    alpha: float
    space: MetricSpace

    def __post_init__(self):
        if not (self.H > 0 and math.isfinite(self.H)):
            raise ConfigurationError(f"H deve ser positivo e finito, recebeu {self.H}.")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"α deve estar em [0, 1], recebeu {self.alpha}.")
        if self.space.dim != self.taylor.oracle.dim:
            raise ConfigurationError("Espaço e oráculo com dimensões diferentes.")

    @property
    def p(self) -> int:
        return self.taylor.degree

    @property
    def power(self) -> float:
        return self.p + self.alpha

    @property
    def coef(self) -> float:
        """H/p!."""
        return self.H / math.factorial(self.p)

    @property
    def center(self) -> np.ndarray:
        return self.taylor.center
