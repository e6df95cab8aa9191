"""
Services do app subsolver.

Calcula um minimizador inexato x⁺ do modelo regularizado que satisfaça
    Ω(x⁺) ≤ f(x)   e   ‖∇Ω(x⁺)‖* ≤ θ‖x⁺ − x‖^{p+α−1}
(ou ‖∇Ω(x⁺)‖* ≤ inner_gtol, piso numérico).
"""

import logging
import math

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq

from apps.core.exceptions import ConfigurationError, NumericalError, SubsolverStallError, UnsupportedOrderError
from apps.core.vectors import Vector, as_vector
from apps.oracle.models import RegularizedModel
from apps.oracle.services import (
    hessian_matrix,
    omega_gradient_at_step,
    omega_value_at_step,
    step_norm,
    taylor_gradient_at_step,
)
from apps.space.services import dual_norm
from apps.subsolver.models import CertificateReport, SubsolverMode, SubsolverOptions, TrialPoint

logger = logging.getLogger(__name__)

VALUE_SLACK = 1e-12
SECULAR_RTOL = 1e-15
MAX_BACKTRACKS = 60
MAX_BRACKET_STEPS = 2100


class _HardCase(Exception):
    """Sistema deslocado indefinido em todo o intervalo: cai para FirstOrder."""


# ==============================================================================
# CERTIFICADOS
# ==============================================================================


def gradient_threshold(model: RegularizedModel, step: float, opts: SubsolverOptions) -> float:
    return max(opts.theta * step ** (model.power - 1.0), opts.inner_gtol)


def check_certificates(
    model: RegularizedModel, point: Vector, f_center: float, opts: SubsolverOptions
) -> CertificateReport:
    """Reavalia Ω e ∇Ω em point sem usar nada do solver."""
    h = as_vector(point, model.space.dim, name="point") - model.center
    value = omega_value_at_step(model, h)
    gnorm = dual_norm(model.space, omega_gradient_at_step(model, h))
    threshold = gradient_threshold(model, step_norm(model.space, h), opts)
    return CertificateReport(
        model_value=value,
        f_center=f_center,
        gradient_norm=gnorm,
        gradient_threshold=threshold,
        value_ok=value <= f_center + VALUE_SLACK * max(1.0, abs(f_center)),
        gradient_ok=gnorm <= threshold,
    )


def _finalize(
    model: RegularizedModel,
    h: np.ndarray,
    inner_iters: int,
    solver: SubsolverMode,
    trace: tuple[float, ...] = (),
) -> TrialPoint:
    point = model.center + h
    model_value = omega_value_at_step(model, h)
    gnorm = dual_norm(model.space, omega_gradient_at_step(model, h))
    oracle = model.taylor.oracle
    f_value = float(oracle.value(point))
    f_gradient = np.asarray(oracle.gradient(point), dtype=np.float64)
    if not (math.isfinite(model_value) and math.isfinite(f_value) and np.all(np.isfinite(f_gradient))):
        raise NumericalError("Valor não finito no ponto de teste do subproblema.")
    return TrialPoint(
        point=point,
        model_value=model_value,
        model_gradient_norm=gnorm,
        step_norm=step_norm(model.space, h),
        f_value=f_value,
        f_gradient=f_gradient,
        inner_iters=inner_iters,
        solver=solver,
        model_trace=trace,
    )


def _center_trial(model: RegularizedModel, solver: SubsolverMode) -> TrialPoint:
    return _finalize(model, np.zeros(model.space.dim), 0, solver)


# ==============================================================================
# SOLVER SECULAR (p = 2)
# ==============================================================================


def secular_solve_p2(model: RegularizedModel, opts: SubsolverOptions | None = None) -> TrialPoint:
    """
    Minimizador global de Ω para p = 2 pela equação do raio.

    Com G = ∇²f(x) e λ(r) = H(2+α)/2·r^α, o passo h(r) = −(G + λ(r)B)⁻¹∇f(x)
    é estacionário quando ‖h(r)‖ = r. A decomposição generalizada G V = B V diag(μ)
    reduz ‖h(r)‖ a uma soma escalar; a raiz é isolada por bracketing e brentq.
    """
    if model.p != 2:
        raise UnsupportedOrderError("Solver secular disponível apenas para p=2.")
    opts = opts or SubsolverOptions()
    space = model.space
    if space.dim > opts.dense_limit:
        raise ConfigurationError(f"n={space.dim} acima do limite denso ({opts.dense_limit}).")

    g = model.taylor.g0
    gnorm = dual_norm(space, g)
    if gnorm == 0.0:
        return _center_trial(model, SubsolverMode.SECULAR)

    G = hessian_matrix(model.taylor.oracle, model.center)
    mu, V = eigh(G, space.as_matrix())
    beta = V.T @ g
    lam_coef = model.coef * model.power
    alpha = model.alpha
    mu_min = float(mu.min())

    def step(lam: float) -> np.ndarray:
        return -V @ (beta / (mu + lam))

    if alpha == 0.0:
        # λ constante: sistema linear direto
        if mu_min + lam_coef <= 0.0:
            raise _HardCase()
        return _finalize(model, step(lam_coef), 1, SubsolverMode.SECULAR)

    def radius_gap(r: float) -> float:
        shifted = mu + lam_coef * r**alpha
        if np.any(shifted <= 0.0):
            return math.inf
        return math.sqrt(float(np.sum((beta / shifted) ** 2))) - r

    r_min = (max(0.0, -mu_min) / lam_coef) ** (1.0 / alpha)
    hi = max((gnorm / lam_coef) ** (1.0 / (1.0 + alpha)), 2.0 * r_min)
    for _ in range(200):
        if radius_gap(hi) <= 0.0:
            break
        hi *= 2.0
    else:
        raise NumericalError("Equação secular sem limitante superior.")

    lo = r_min + 0.5 * (hi - r_min)
    for _ in range(MAX_BRACKET_STEPS):
        gap = radius_gap(lo)
        if 0.0 < gap < math.inf:
            break
        if gap == math.inf:
            lo = lo + 0.5 * (hi - lo)
            continue
        nxt = r_min + 0.5 * (lo - r_min)
        if nxt == lo or nxt <= 0.0:
            raise _HardCase()
        lo = nxt
    else:
        raise _HardCase()

    if radius_gap(hi) == 0.0:
        radius, calls = hi, 0
    else:
        radius, info = brentq(radius_gap, lo, hi, xtol=1e-300, rtol=SECULAR_RTOL, maxiter=500, full_output=True)
        calls = info.function_calls
    return _finalize(model, step(lam_coef * radius**alpha), calls, SubsolverMode.SECULAR)


# ==============================================================================
# DESCIDA DE PRIMEIRA ORDEM
# ==============================================================================


def _line_decrement(model: RegularizedModel, h: np.ndarray, d: np.ndarray, grad_phi: np.ndarray) -> float:
    """
    Ω(h + d) − Ω(h) calculado pelos coeficientes do polinômio de Taylor ao longo
    de d e por expm1/log1p no regularizador; evita o cancelamento de Ω(h+d) − Ω(h).
    """
    taylor = model.taylor
    oracle, x = taylor.oracle, taylor.center
    dphi = float(np.dot(grad_phi, d)) + 0.5 * float(np.dot(oracle.hessian_apply(x, d), d))
    if taylor.degree == 3:
        tdd = oracle.third_apply(x, d)
        dphi += 0.5 * float(np.dot(tdd, h)) + float(np.dot(tdd, d)) / 6.0

    space = model.space
    bh = space.apply(h)
    bd = space.apply(d)
    b2 = float(np.dot(bh, h))
    diff2 = 2.0 * float(np.dot(bh, d)) + float(np.dot(bd, d))
    b = math.sqrt(max(b2, 0.0))
    a = math.sqrt(max(b2 + diff2, 0.0))
    if b == 0.0:
        dreg = model.coef * a**model.power
    elif a == 0.0:
        dreg = -model.coef * b**model.power
    else:
        ratio = diff2 / (b * (a + b))
        dreg = model.coef * b**model.power * math.expm1(model.power * math.log1p(ratio))
    return dphi + dreg


def _regularizer_radius(model: RegularizedModel, gnorm: float) -> float:
    """Raio em que o gradiente do regularizador iguala ‖∇f(x)‖*."""
    return (gnorm / (model.coef * model.power)) ** (1.0 / (model.power - 1.0))


def first_order_inner(
    model: RegularizedModel,
    opts: SubsolverOptions | None = None,
    start: Vector | None = None,
) -> TrialPoint:
    """
    Descida monótona em Ω na métrica B: Armijo 1e-4, backtracking 0.5 e passo
    inicial Barzilai-Borwein a partir da segunda iteração. Parte de um passo de
    gradiente salvaguardado (ou de start, quando este já está abaixo de f(x)).
    """
    opts = opts or SubsolverOptions()
    space = model.space
    f0 = model.taylor.f0
    g0 = model.taylor.g0
    gnorm0 = dual_norm(space, g0)
    if gnorm0 <= opts.inner_gtol:
        return _center_trial(model, SubsolverMode.FIRST_ORDER)

    zero = np.zeros(space.dim)
    h = None
    value = f0
    t = _regularizer_radius(model, gnorm0) / gnorm0
    if start is not None:
        candidate = as_vector(start, space.dim, name="start") - model.center
        delta = _line_decrement(model, zero, candidate, g0)
        if math.isfinite(delta) and delta < 0.0:
            h, value = candidate, f0 + delta

    if h is None:
        direction = -space.solve(g0)
        for _ in range(200):
            delta = _line_decrement(model, zero, t * direction, g0)
            if delta < 0.0:
                break
            t *= 0.5
        else:
            raise SubsolverStallError("Sem decréscimo a partir do centro.", best=_center_trial(model, SubsolverMode.FIRST_ORDER))
        h, value = t * direction, f0 + delta

    trace = [value]
    grad = omega_gradient_at_step(model, h)
    gnorm = dual_norm(space, grad)
    prev_h = prev_grad = None

    for it in range(1, opts.max_inner_iters + 1):
        if gnorm <= gradient_threshold(model, step_norm(space, h), opts):
            return _finalize(model, h, it, SubsolverMode.FIRST_ORDER, tuple(trace))

        direction = -space.solve(grad)
        if prev_h is not None:
            s = h - prev_h
            sz = float(np.dot(s, grad - prev_grad))
            t = float(np.dot(space.apply(s), s)) / sz if sz > 0.0 else 2.0 * t

        grad_phi = taylor_gradient_at_step(model.taylor, h)
        for _ in range(MAX_BACKTRACKS):
            delta = _line_decrement(model, h, t * direction, grad_phi)
            if not math.isfinite(delta):
                raise NumericalError("Valor não finito do modelo na busca linear interna.")
            if delta <= -opts.armijo * t * gnorm * gnorm:
                break
            t *= opts.backtrack
        else:
            logger.debug("Backtracking esgotado com ‖∇Ω‖*=%.3e", gnorm)
            raise SubsolverStallError(
                "Busca linear interna sem decréscimo suficiente.",
                best=_finalize(model, h, it, SubsolverMode.FIRST_ORDER, tuple(trace)),
            )

        prev_h, prev_grad = h, grad
        h = h + t * direction
        value += delta
        trace.append(value)
        grad = omega_gradient_at_step(model, h)
        gnorm = dual_norm(space, grad)

    raise SubsolverStallError(
        f"Limite de {opts.max_inner_iters} iterações internas atingido.",
        best=_finalize(model, h, opts.max_inner_iters, SubsolverMode.FIRST_ORDER, tuple(trace)),
    )


# ==============================================================================
# ENTRADA PRINCIPAL
# ==============================================================================


def resolve_mode(model: RegularizedModel, opts: SubsolverOptions) -> SubsolverMode:
    if opts.mode != SubsolverMode.AUTO:
        return opts.mode
    if model.p == 2 and model.space.dim <= opts.dense_limit:
        return SubsolverMode.SECULAR
    return SubsolverMode.FIRST_ORDER


def solve_model(model: RegularizedModel, f_center: float, opts: SubsolverOptions | None = None) -> TrialPoint:
    """Ponto de teste que satisfaz os dois certificados de aceitação."""
    opts = opts or SubsolverOptions()
    if dual_norm(model.space, model.taylor.g0) <= opts.inner_gtol:
        return _center_trial(model, resolve_mode(model, opts))

    if resolve_mode(model, opts) == SubsolverMode.SECULAR:
        try:
            trial = secular_solve_p2(model, opts)
        except _HardCase:
            logger.info("Caso difícil no solver secular (H=%.4g); usando FirstOrder.", model.H)
            return first_order_inner(model, opts)
        if check_certificates(model, trial.point, f_center, opts).ok:
            return trial
        logger.debug("Ponto secular sem certificado; refinando com FirstOrder.")
        return first_order_inner(model, opts, start=trial.point)

    return first_order_inner(model, opts)
