"""
Models do app subsolver.
"""

from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from apps.core.exceptions import ConfigurationError


def _settings():
    from config import settings

    return settings


class SubsolverMode(StrEnum):
    """Estratégia de minimização do modelo regularizado."""

    SECULAR = "secular"
    FIRST_ORDER = "first_order"
    AUTO = "auto"


@dataclass(frozen=True)
class SubsolverOptions:
    """
    Parâmetros do subproblema.

    Com theta = 0 o certificado de gradiente exige ponto estacionário exato;
    nesse caso o modo FirstOrder para no piso absoluto inner_gtol.
    """

    theta: float = field(default_factory=lambda: _settings().DEFAULT_THETA)
    max_inner_iters: int = field(default_factory=lambda: _settings().MAX_INNER_ITERS)
    inner_gtol: float = field(default_factory=lambda: _settings().INNER_GTOL)
    mode: SubsolverMode = SubsolverMode.AUTO
    dense_limit: int = field(default_factory=lambda: _settings().DENSE_LIMIT)
    armijo: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self):
        if self.theta < 0:
            raise ConfigurationError(f"θ deve ser ≥ 0, recebeu {self.theta}.")
        if self.max_inner_iters < 1:
            raise ConfigurationError("max_inner_iters deve ser positivo.")
        if self.inner_gtol <= 0:
            raise ConfigurationError("inner_gtol deve ser positivo.")
        if not (0 < self.armijo < 1 and 0 < self.backtrack < 1):
            raise ConfigurationError("Parâmetros de Armijo/backtracking fora de (0, 1).")
        object.__setattr__(self, "mode", SubsolverMode(self.mode))


@dataclass(frozen=True, eq=False)
class TrialPoint:
    """Ponto de teste x⁺ com os dados de certificado e a avaliação de f em x⁺."""

    point: np.ndarray
    model_value: float
    model_gradient_norm: float
    step_norm: float
    f_value: float
    f_gradient: np.ndarray
    inner_iters: int
    solver: SubsolverMode = SubsolverMode.AUTO
    # trajetória de Ω nas iterações internas (vazia no modo secular)
    model_trace: tuple[float, ...] = ()


@dataclass(frozen=True)
class CertificateReport:
    """Reavaliação independente das duas condições de aceitação."""

    model_value: float
    f_center: float
    gradient_norm: float
    gradient_threshold: float
    value_ok: bool
    gradient_ok: bool

    @property
    def ok(self) -> bool:
        return self.value_ok and self.gradient_ok
