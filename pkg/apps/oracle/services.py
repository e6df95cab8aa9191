"""
Services do app oracle.

Avaliação exata do modelo de Taylor Φ_{x,p} e do modelo regularizado
Ω^{(α)}_{x,p,H}, mais a estimativa empírica da constante de Hölder (p=2).
As funções *_at_step recebem o passo h = y − x e são usadas nos laços internos.
"""

import logging
import math

import numpy as np

from apps.core.exceptions import ConfigurationError, UnsupportedOrderError
from apps.core.vectors import DualVector, Vector, as_vector
from apps.oracle.models import DerivativeOracle, RegularizedModel, TaylorModel
from apps.space.models import MetricSpace

logger = logging.getLogger(__name__)

POWER_ITERATIONS = 50
POWER_TOL = 1e-8


# ==============================================================================
# CONSTRUÇÃO
# ==============================================================================


def build_taylor_model(oracle: DerivativeOracle, center: Vector, degree: int | None = None) -> TaylorModel:
    center = as_vector(center, oracle.dim, name="center")
    center.setflags(write=False)
    return TaylorModel(
        oracle=oracle,
        center=center,
        degree=degree or oracle.order,
        f0=float(oracle.value(center)),
        g0=np.asarray(oracle.gradient(center), dtype=np.float64),
    )


def build_regularized_model(
    oracle: DerivativeOracle,
    center: Vector,
    H: float,
    alpha: float,
    space: MetricSpace,
    taylor: TaylorModel | None = None,
) -> RegularizedModel:
    """Monta Ω; reaproveita um TaylorModel já avaliado quando informado."""
    if taylor is None:
        taylor = build_taylor_model(oracle, center)
    return RegularizedModel(taylor=taylor, H=float(H), alpha=float(alpha), space=space)


# ==============================================================================
# MODELO DE TAYLOR
# ==============================================================================


def taylor_value_at_step(model: TaylorModel, h: Vector) -> float:
    oracle, x = model.oracle, model.center
    value = model.f0 + float(np.dot(model.g0, h))
    value += 0.5 * float(np.dot(oracle.hessian_apply(x, h), h))
    if model.degree == 3:
        value += float(np.dot(oracle.third_apply(x, h), h)) / 6.0
    return value


def taylor_gradient_at_step(model: TaylorModel, h: Vector) -> DualVector:
    oracle, x = model.oracle, model.center
    grad = model.g0 + oracle.hessian_apply(x, h)
    if model.degree == 3:
        grad = grad + 0.5 * oracle.third_apply(x, h)
    return grad


def taylor_value(model: TaylorModel, y: Vector) -> float:
    """Φ_{x,p}(y) = f(x) + Σ_{i≤p} (1/i!) D^i f(x)[y − x]^i."""
    y = as_vector(y, model.oracle.dim, name="y")
    return taylor_value_at_step(model, y - model.center)


def taylor_gradient(model: TaylorModel, y: Vector) -> DualVector:
    """∇Φ_{x,p}(y)."""
    y = as_vector(y, model.oracle.dim, name="y")
    return taylor_gradient_at_step(model, y - model.center)


# ==============================================================================
# MODELO REGULARIZADO
# ==============================================================================


def step_norm(space: MetricSpace, h: Vector) -> float:
    return math.sqrt(max(float(np.dot(space.apply(h), h)), 0.0))


def omega_value_at_step(model: RegularizedModel, h: Vector) -> float:
    r = step_norm(model.space, h)
    return taylor_value_at_step(model.taylor, h) + model.coef * r**model.power


def omega_gradient_at_step(model: RegularizedModel, h: Vector) -> DualVector:
    grad = taylor_gradient_at_step(model.taylor, h)
    r = step_norm(model.space, h)
    if r == 0.0:
        # extensão contínua: o termo ‖h‖^{p+α−1} se anula
        return grad
    weight = model.coef * model.power * r ** (model.power - 2.0)
    return grad + weight * model.space.apply(h)


def omega_value(model: RegularizedModel, y: Vector) -> float:
    y = as_vector(y, model.space.dim, name="y")
    return omega_value_at_step(model, y - model.center)


def omega_gradient(model: RegularizedModel, y: Vector) -> DualVector:
    y = as_vector(y, model.space.dim, name="y")
    return omega_gradient_at_step(model, y - model.center)


# ==============================================================================
# HÖLDER
# ==============================================================================


def hessian_matrix(oracle: DerivativeOracle, x: Vector) -> np.ndarray:
    """Materializa D²f(x) coluna a coluna e simetriza."""
    n = oracle.dim
    cols = np.empty((n, n))
    basis = np.zeros(n)
    for j in range(n):
        basis[j] = 1.0
        cols[:, j] = oracle.hessian_apply(x, basis)
        basis[j] = 0.0
    return 0.5 * (cols + cols.T)


def _operator_norm(matrix: np.ndarray, space: MetricSpace, rng: np.random.Generator) -> float:
    """
    ‖D‖ = sup |D[h, h]| / ‖h‖² por iteração de potência sobre B⁻¹D.
    A razão ‖B⁻¹Dv‖/‖v‖ nunca passa da norma do operador.
    """
    v = rng.standard_normal(space.dim)
    v /= step_norm(space, v)
    estimate = 0.0
    for _ in range(POWER_ITERATIONS):
        w = space.solve(matrix @ v)
        current = step_norm(space, w)
        if current == 0.0:
            return 0.0
        v = w / current
        converged = abs(current - estimate) <= POWER_TOL * current
        estimate = max(estimate, current)
        if converged:
            break
    return estimate


def estimate_holder_constant(
    oracle: DerivativeOracle,
    nu: float,
    sample_pairs: int,
    seed: int,
    space: MetricSpace | None = None,
    scale: float = 1.0,
) -> float:
    """
    Estimativa inferior de H_{f,2}(ν): máximo amostral de
    ‖D²f(x) − D²f(y)‖ / ‖x − y‖^ν. Os pares alternam entre x, y ~ N(0, scale² I)
    independentes e pares radiais y = s·x com s ~ U(−1, 1).
    """
    if oracle.order != 2:
        raise UnsupportedOrderError("Estimativa de Hölder disponível apenas para p=2.")
    if sample_pairs < 1:
        raise ConfigurationError("sample_pairs deve ser ≥ 1.")
    if not 0.0 <= nu <= 1.0:
        raise ConfigurationError(f"ν deve estar em [0, 1], recebeu {nu}.")

    space = space or MetricSpace.identity(oracle.dim)
    rng = np.random.default_rng(seed)
    best = 0.0
    for i in range(sample_pairs):
        x = scale * rng.standard_normal(oracle.dim)
        y = scale * rng.standard_normal(oracle.dim) if i % 2 == 0 else rng.uniform(-1.0, 1.0) * x
        dist = step_norm(space, x - y)
        if dist == 0.0:
            continue
        diff = hessian_matrix(oracle, x) - hessian_matrix(oracle, y)
        best = max(best, _operator_norm(diff, space, rng) / dist**nu)

    logger.debug("Estimativa de Hölder (ν=%s, %d pares): %.6g", nu, sample_pairs, best)
    return best
