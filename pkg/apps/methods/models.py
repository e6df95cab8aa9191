"""
Models do app methods: critérios de parada, estados dos métodos e o registro
de execução (RunRecord).
"""

import math
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from apps.core.exceptions import ConfigurationError
from apps.space.models import MetricSpace


class MethodKind(StrEnum):
    """Os quatro métodos externos."""

    TENSOR = "tensor"
    ADAPTIVE_TENSOR = "adaptive-tensor"
    ACCELERATED = "accelerated"
    ADAPTIVE_ACCELERATED = "adaptive-accelerated"

    @property
    def adaptive(self) -> bool:
        return self in (MethodKind.ADAPTIVE_TENSOR, MethodKind.ADAPTIVE_ACCELERATED)

    @property
    def accelerated(self) -> bool:
        return self in (MethodKind.ACCELERATED, MethodKind.ADAPTIVE_ACCELERATED)


class RunStatus(StrEnum):
    """Status terminal de uma execução."""

    RUNNING = "running", "Em execução"
    CONVERGED = "converged", "Convergiu"
    MAX_ITERS = "max_iters", "Limite de iterações"
    DESCENT_FAILURE = "descent_failure", "Teste de descida falhou (use o modo adaptativo)"
    SUBSOLVER_STALL = "subsolver_stall", "Subproblema travou"
    LINE_SEARCH_BLOWUP = "line_search_blowup", "Busca adaptativa divergiu"
    NUMERICAL_ERROR = "numerical_error", "Erro numérico"

    def __new__(cls, value, label):
        obj = str.__new__(cls, value)
        obj._value_ = value
        obj.label = label
        return obj

    @property
    def failed(self) -> bool:
        return self not in (RunStatus.CONVERGED, RunStatus.MAX_ITERS, RunStatus.RUNNING)


@dataclass(frozen=True)
class StoppingRule:
    """
    Parada por resíduo f(x_t) − f* ≤ eps (quando f* é conhecido) ou por
    ‖∇f(x_t)‖* ≤ gtol; max_outer_iters sempre vale.
    """

    eps: float | None = None
    gtol: float | None = None
    max_outer_iters: int = 1000
    f_star: float | None = None

    def __post_init__(self):
        if self.max_outer_iters < 0:
            raise ConfigurationError("max_outer_iters deve ser ≥ 0.")
        if self.eps is not None and not 0.0 < self.eps < 1.0:
            raise ConfigurationError(f"eps deve estar em (0, 1), recebeu {self.eps}.")
        if self.gtol is not None and self.gtol < 0:
            raise ConfigurationError("gtol deve ser ≥ 0.")
        residual_active = self.eps is not None and self.f_star is not None
        if not residual_active and self.gtol is None:
            raise ConfigurationError("Nenhum critério de parada ativo (informe eps com f* ou gtol).")

    def residual(self, f_value: float) -> float:
        return f_value - self.f_star if self.f_star is not None else math.nan

    def reached(self, f_value: float, grad_norm: float) -> bool:
        if self.eps is not None and self.f_star is not None and self.residual(f_value) <= self.eps:
            return True
        return self.gtol is not None and grad_norm <= self.gtol


@dataclass
class BasicState:
    """Estado dos métodos tensoriais básicos: x_t, H_t (ou M fixo), t e O_T."""

    x: np.ndarray
    f: float
    grad: np.ndarray
    H: float
    t: int = 0
    oracle_calls: int = 0
    # H_t = H_0 · 2^scale nos métodos adaptativos
    scale: int = 0


@dataclass
class EstimatingSequence:
    """
    ψ_t(x) = lin_const + ⟨lin_coeff, x⟩ + (1/power)‖x − x0‖^power.

    lin_coeff acumula Σ a_i ∇f(x_{i+1}) e lin_const acumula
    Σ a_i [f(x_{i+1}) − ⟨∇f(x_{i+1}), x_{i+1}⟩].
    """

    x0: np.ndarray
    power: float
    lin_coeff: np.ndarray
    lin_const: float = 0.0
    A: float = 0.0

    @classmethod
    def start(cls, x0: np.ndarray, power: float) -> "EstimatingSequence":
        return cls(x0=np.array(x0, dtype=np.float64), power=power, lin_coeff=np.zeros_like(x0, dtype=np.float64))

    def absorb(self, a: float, f_value: float, gradient: np.ndarray, point: np.ndarray) -> None:
        """Soma a linearização de f em point com peso a e atualiza A."""
        self.lin_coeff = self.lin_coeff + a * gradient
        self.lin_const += a * (f_value - float(np.dot(gradient, point)))
        self.A += a

    def value(self, space: MetricSpace, x: np.ndarray) -> float:
        d = x - self.x0
        r = math.sqrt(max(float(np.dot(space.apply(d), d)), 0.0))
        return self.lin_const + float(np.dot(self.lin_coeff, x)) + r**self.power / self.power

    def gradient(self, space: MetricSpace, x: np.ndarray) -> np.ndarray:
        d = x - self.x0
        r = math.sqrt(max(float(np.dot(space.apply(d), d)), 0.0))
        if r == 0.0:
            return self.lin_coeff.copy()
        return self.lin_coeff + r ** (self.power - 2.0) * space.apply(d)


@dataclass
class AcceleratedState:
    """Estado dos métodos acelerados: x_t, v_t, ψ_t, H_t, t e O_T."""

    x: np.ndarray
    v: np.ndarray
    f: float
    grad: np.ndarray
    est: EstimatingSequence
    H: float
    t: int = 0
    oracle_calls: int = 0
    scale: int = 0


@dataclass(frozen=True, eq=False)
class IterationInfo:
    """Dados de um passo externo aceito, entregues ao callback."""

    t: int
    x: np.ndarray
    x_next: np.ndarray
    center: np.ndarray
    f_center: float
    f_prev: float
    M: float
    ls_trials: int
    trial: object
    # somente nos acelerados
    v: np.ndarray | None = None
    v_next: np.ndarray | None = None
    a: float | None = None
    gamma: float | None = None
    A_next: float | None = None
    est: EstimatingSequence | None = None
    a_residual: float | None = None
    argmin_residual: float | None = None


@dataclass(frozen=True)
class RunRow:
    t: int
    f: float
    residual: float
    grad_norm: float
    H: float
    inner_iters: int
    ls_trials: int
    oracle_calls: int
    wall_ns: int


@dataclass
class RunRecord:
    """Trilha por iteração de uma execução, ordenada por t."""

    method: MethodKind
    p: int
    alpha: float
    H0: float
    rows: list[RunRow] = field(default_factory=list)
    status: RunStatus = RunStatus.RUNNING
    message: str = ""
    x_final: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return self.rows[-1].t if self.rows else 0

    @property
    def oracle_calls(self) -> int:
        return self.rows[-1].oracle_calls if self.rows else 0

    @property
    def final_residual(self) -> float:
        return self.rows[-1].residual if self.rows else math.nan

    def best_residuals(self) -> list[float]:
        """Mínimo corrente do resíduo (os acelerados não são monótonos em f)."""
        best, out = math.inf, []
        for row in self.rows:
            if not math.isnan(row.residual):
                best = min(best, row.residual)
            out.append(best if best < math.inf else math.nan)
        return out

    @property
    def converged(self) -> bool:
        return self.status == RunStatus.CONVERGED
