"""
Registro de instâncias do bench.

Embutidas são registradas por nome com @register_instance; plugins externos
são carregados de "modulo:fabrica" via importlib. Toda fábrica recebe
(p, nu, seed, **options) e devolve um Problem.
"""

import importlib
import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from apps.bench.schemas import InstanceKind, InstanceSpec, RunParams
from apps.core.exceptions import ConfigurationError
from apps.core.vectors import as_vector
from apps.hardfn.models import HardInstance
from apps.hardfn.services import HardOracle
from apps.oracle.builtins import LogSumExpOracle, PowerSumOracle, QuadraticOracle
from apps.oracle.models import DerivativeOracle, HolderHint

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Problem:
    oracle: DerivativeOracle
    x0: np.ndarray
    f_star: float | None = None
    x_star: np.ndarray | None = None
    holder: HolderHint | None = None
    label: str = ""
    # Instância f_k quando aplicável (habilita o envelope inferior)
    hard: HardInstance | None = None


Factory = Callable[..., Problem]

_REGISTRY: dict[str, Factory] = {}


def register_instance(name: str):
    def decorator(factory: Factory) -> Factory:
        if name in _REGISTRY:
            raise ConfigurationError(f"Instância '{name}' já registrada.")
        _REGISTRY[name] = factory
        return factory

    return decorator


def registered_names() -> list[str]:
    return sorted(_REGISTRY)


def load_plugin(target: str) -> Factory:
    module_name, _, attr = target.partition(":")
    try:
        module = importlib.import_module(module_name)
    except ImportError as exc:
        raise ConfigurationError(f"Plugin '{target}': módulo não encontrado ({exc}).") from exc
    factory = getattr(module, attr, None)
    if not callable(factory):
        raise ConfigurationError(f"Plugin '{target}': fábrica '{attr}' inexistente.")
    return factory


def hard_problem(n: int, k: int, p: int, nu: float) -> Problem:
    inst = HardInstance(n=n, k=k, p=p, nu=nu)
    oracle = HardOracle(inst)
    x_star, f_star = oracle.optimum()
    return Problem(
        oracle=oracle,
        x0=np.zeros(n),
        f_star=f_star,
        x_star=x_star,
        holder=oracle.holder_hint,
        label=f"f_{k} (n={n})",
        hard=inst,
    )


def build_problem(spec: InstanceSpec, params: RunParams) -> Problem:
    if spec.kind == InstanceKind.HARD:
        problem = hard_problem(spec.n, spec.k, params.p, params.nu)
    else:
        if spec.kind == InstanceKind.BUILTIN:
            factory = _REGISTRY.get(spec.name)
            if factory is None:
                raise ConfigurationError(
                    f"Instância '{spec.name}' desconhecida; disponíveis: {', '.join(registered_names())}."
                )
        else:
            factory = load_plugin(spec.target)
        options = dict(spec.options)
        if spec.n is not None:
            options.setdefault("n", spec.n)
        problem = factory(p=params.p, nu=params.nu, seed=params.seed, **options)
        if not isinstance(problem, Problem):
            raise ConfigurationError(f"Fábrica de '{spec.slug}' não devolveu um Problem.")

    if params.x0 is not None:
        x0 = as_vector(params.x0, problem.oracle.dim, name="x0")
        problem = Problem(
            oracle=problem.oracle,
            x0=x0,
            f_star=problem.f_star,
            x_star=problem.x_star,
            holder=problem.holder,
            label=problem.label,
            hard=problem.hard,
        )
    logger.debug("Instância montada: %s", problem.label or spec.slug)
    return problem


# ==============================================================================
# EMBUTIDAS
# ==============================================================================


@register_instance("quadratic")
def quadratic(p: int, nu: float, seed: int, n: int = 10, cond: float = 100.0) -> Problem:
    """Quadrática diagonal com autovalores em [1, cond] e b = 1."""
    Q = np.diag(np.linspace(1.0, float(cond), int(n)))
    oracle = QuadraticOracle(Q, np.ones(int(n)), order=p)
    x_star = oracle.minimizer()
    return Problem(
        oracle=oracle,
        x0=np.zeros(int(n)),
        f_star=oracle.value(x_star),
        x_star=x_star,
        holder=oracle.holder_hint,
        label=f"quadrática (n={n}, cond={cond:g})",
    )


@register_instance("power-sum")
def power_sum(p: int, nu: float, seed: int, n: int = 10, start: float = 1.0) -> Problem:
    oracle = PowerSumOracle(int(n), nu, order=p)
    return Problem(
        oracle=oracle,
        x0=np.full(int(n), float(start)),
        f_star=0.0,
        x_star=np.zeros(int(n)),
        holder=oracle.holder_hint,
        label=f"soma de potências (n={n}, ν={nu:g})",
    )


@register_instance("log-sum-exp")
def log_sum_exp(p: int, nu: float, seed: int, n: int = 10, terms: int = 30, mu: float = 1.0) -> Problem:
    """Sem f* conhecido: use gtol como critério de parada."""
    oracle = LogSumExpOracle.random(int(n), int(terms), seed=seed, mu=float(mu), order=p)
    return Problem(oracle=oracle, x0=np.zeros(int(n)), label=f"log-sum-exp (n={n}, m={terms})")
