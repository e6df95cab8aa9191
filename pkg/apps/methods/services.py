"""
Services do app methods: os quatro métodos tensoriais externos.

- run_tensor:                 M fixo, teste de descida sobre f(x_t) − f(x⁺)
- run_adaptive_tensor:        M = 2^i H_t com duplicação até o teste passar
- run_accelerated:            sequência estimadora com M fixo
- run_adaptive_accelerated:   sequência estimadora com busca adaptativa

Os executores levantam as exceções de apps.core.exceptions com o RunRecord
parcial anexado em exc.record.
"""

import logging
import math
import time
from collections.abc import Callable

import numpy as np
from scipy.optimize import brentq

from apps.core.exceptions import (
    ConfigurationError,
    HolderTensorError,
    LineSearchBlowupError,
    NumericalError,
    SubsolverStallError,
)
from apps.core.vectors import as_vector
from apps.methods.models import (
    AcceleratedState,
    BasicState,
    EstimatingSequence,
    IterationInfo,
    MethodKind,
    RunRecord,
    RunRow,
    RunStatus,
    StoppingRule,
)
from apps.oracle.models import DerivativeOracle, RegularizedModel, SmoothnessParams, TaylorModel
from apps.space.models import MetricSpace
from apps.space.services import dual_norm
from apps.subsolver.models import SubsolverOptions, TrialPoint
from apps.subsolver.services import solve_model

logger = logging.getLogger(__name__)

Callback = Callable[[IterationInfo], None]

ARGMIN_TOL = 1e-9


def _max_doublings() -> int:
    from config import settings

    return settings.MAX_DOUBLINGS


# ==============================================================================
# CONSTANTES E TESTES DE DESCIDA
# ==============================================================================


def fixed_regularization_constant(nu: float, H_f: float, theta: float, p: int) -> float:
    """M_ν = max{3H_f/2, 3θ(p−1)!}."""
    if not 0.0 <= nu <= 1.0:
        raise ConfigurationError(f"ν deve estar em [0, 1], recebeu {nu}.")
    if H_f < 0 or theta < 0:
        raise ConfigurationError("H_f e θ devem ser não negativos.")
    value = max(1.5 * H_f, 3.0 * theta * math.factorial(p - 1))
    if value <= 0.0:
        raise ConfigurationError("H_f e θ nulos: constante de regularização indefinida.")
    return value


def accelerated_regularization_constant(nu: float, H_f: float, theta: float, p: int) -> float:
    """Limiar dos acelerados: (p+ν−1)(H_f + θ(p−1)!)."""
    if H_f < 0 or theta < 0:
        raise ConfigurationError("H_f e θ devem ser não negativos.")
    value = (p + nu - 1.0) * (H_f + theta * math.factorial(p - 1))
    if value <= 0.0:
        raise ConfigurationError("H_f e θ nulos: constante de regularização indefinida.")
    return value


def descent_rhs(grad_norm: float, M: float, p: int, alpha: float) -> float:
    """Lado direito do teste de descida: ‖g⁺‖*^{q/(q−1)} / (8(p+1)! M^{1/(q−1)}), q = p+α."""
    q = p + alpha
    return grad_norm ** (q / (q - 1.0)) / (8.0 * math.factorial(p + 1) * M ** (1.0 / (q - 1.0)))


def accelerated_descent_rhs(grad_norm: float, M: float, p: int, alpha: float) -> float:
    """¼((p−1)!/M)^{1/(q−1)} ‖g⁺‖*^{q/(q−1)}."""
    q = p + alpha
    return 0.25 * (math.factorial(p - 1) / M) ** (1.0 / (q - 1.0)) * grad_norm ** (q / (q - 1.0))


# ==============================================================================
# SEQUÊNCIA ESTIMADORA
# ==============================================================================


def a_t_constant(M: float, p: int) -> float:
    return math.factorial(p - 1) / (2.0 ** (3 * p - 1) * M)


def a_t_residual(a: float, A: float, M: float, p: int, alpha: float) -> float:
    """|a^q − c(A+a)^{q−1}| / max(a^q, c)."""
    q = p + alpha
    c = a_t_constant(M, p)
    return abs(a**q - c * (A + a) ** (q - 1.0)) / max(a**q, c)


def solve_a_t(A: float, M: float, p: int, alpha: float) -> float:
    """
    Raiz positiva de a^q = c(A + a)^{q−1}, c = (p−1)!/(2^{3p−1}M).

    Resolve a forma equivalente a·(a/(A+a))^{q−1} = c, estritamente crescente
    em a, com bracketing a partir de max(1, c), brentq e um passo de Newton.
    """
    if A < 0 or M <= 0:
        raise ConfigurationError("solve_a_t exige A ≥ 0 e M > 0.")
    q = p + alpha
    c = a_t_constant(M, p)
    if A == 0.0:
        return c

    def gap(a: float) -> float:
        return a * (a / (A + a)) ** (q - 1.0) - c

    hi = max(1.0, c)
    while gap(hi) <= 0.0:
        hi *= 2.0
    a = brentq(gap, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)

    ratio = a / (A + a)
    slope = ratio ** (q - 1.0) * (1.0 + (q - 1.0) * A / (A + a))
    polished = a - gap(a) / slope
    if polished > 0.0 and abs(gap(polished)) < abs(gap(a)):
        a = polished
    return a


def estimating_argmin(est: EstimatingSequence, space: MetricSpace) -> np.ndarray:
    """v = x0 − τB⁻¹c com τ = ‖c‖*^{(2−r)/(r−1)}; v = x0 quando c = 0."""
    c = est.lin_coeff
    cnorm = dual_norm(space, c)
    if cnorm == 0.0:
        return est.x0.copy()
    r = est.power
    tau = cnorm ** ((2.0 - r) / (r - 1.0))
    return est.x0 - tau * space.solve(c)


def argmin_residual(est: EstimatingSequence, space: MetricSpace, v: np.ndarray) -> float:
    """‖∇ψ(v)‖* / max(1, ‖c‖*)."""
    scale = max(1.0, dual_norm(space, est.lin_coeff))
    return dual_norm(space, est.gradient(space, v)) / scale


# ==============================================================================
# INFRA COMUM
# ==============================================================================


def _prepare(oracle: DerivativeOracle, x0, space: MetricSpace | None):
    space = space or MetricSpace.identity(oracle.dim)
    if space.dim != oracle.dim:
        raise ConfigurationError("Espaço e oráculo com dimensões diferentes.")
    x = as_vector(np.zeros(oracle.dim) if x0 is None else x0, oracle.dim, name="x0")
    return space, x


def _evaluate(oracle: DerivativeOracle, x: np.ndarray) -> tuple[float, np.ndarray]:
    f = float(oracle.value(x))
    g = np.asarray(oracle.gradient(x), dtype=np.float64)
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        raise NumericalError("Oráculo devolveu valor não finito.")
    return f, g


def _taylor(oracle: DerivativeOracle, x: np.ndarray, f: float, g: np.ndarray) -> TaylorModel:
    center = x.copy()
    center.setflags(write=False)
    return TaylorModel(oracle=oracle, center=center, degree=oracle.order, f0=f, g0=g)


class _Recorder:
    """Anexa linhas ao RunRecord e decide a parada."""

    def __init__(self, record: RunRecord, stop: StoppingRule, space: MetricSpace):
        self.record = record
        self.stop = stop
        self.space = space
        self.started = time.perf_counter_ns()

    def row(self, t, f, grad, H, inner_iters, ls_trials, oracle_calls) -> bool:
        """Registra o estado e devolve True quando a execução deve parar."""
        grad_norm = dual_norm(self.space, grad)
        self.record.rows.append(
            RunRow(
                t=t,
                f=f,
                residual=self.stop.residual(f),
                grad_norm=grad_norm,
                H=H,
                inner_iters=inner_iters,
                ls_trials=ls_trials,
                oracle_calls=oracle_calls,
                wall_ns=time.perf_counter_ns() - self.started,
            )
        )
        logger.debug("%s t=%d f=%.10e ‖∇f‖*=%.3e H=%.4g", self.record.method, t, f, grad_norm, H)
        if grad_norm == 0.0 or self.stop.reached(f, grad_norm):
            self.record.status = RunStatus.CONVERGED
            return True
        if t >= self.stop.max_outer_iters:
            self.record.status = RunStatus.MAX_ITERS
            return True
        return False

    def finish(self, x: np.ndarray) -> RunRecord:
        self.record.x_final = x
        logger.info(
            "%s finalizado: %s após %d iterações (O_T=%d).",
            self.record.method,
            self.record.status.label,
            self.record.iterations,
            self.record.oracle_calls,
        )
        return self.record


_STATUS_BY_ERROR = (
    (SubsolverStallError, RunStatus.SUBSOLVER_STALL),
    (LineSearchBlowupError, RunStatus.LINE_SEARCH_BLOWUP),
    (NumericalError, RunStatus.NUMERICAL_ERROR),
)


def _attach_failure(recorder: _Recorder, exc: HolderTensorError, x: np.ndarray) -> None:
    status = next((s for cls, s in _STATUS_BY_ERROR if isinstance(exc, cls)), RunStatus.NUMERICAL_ERROR)
    recorder.record.status = status
    recorder.record.message = str(exc)
    recorder.record.x_final = x
    logger.error("%s falhou: %s", recorder.record.method, exc)
    exc.record = recorder.record


def _descent_failure(recorder: _Recorder, x: np.ndarray, M: float, t: int) -> RunRecord:
    recorder.record.status = RunStatus.DESCENT_FAILURE
    recorder.record.message = (
        f"Teste de descida falhou em t={t} com M fixo={M:.6g}; aumente M ou use o modo adaptativo."
    )
    logger.warning(recorder.record.message)
    return recorder.finish(x)


# ==============================================================================
# TENSORIAL (M FIXO E ADAPTATIVO)
# ==============================================================================


def run_tensor(
    oracle: DerivativeOracle,
    params: SmoothnessParams,
    M: float,
    stop: StoppingRule,
    sub_opts: SubsolverOptions | None = None,
    x0=None,
    space: MetricSpace | None = None,
    callback: Callback | None = None,
) -> RunRecord:
    """
    Método tensorial com M fixo. Para garantias, M deve estar acima de
    max{3H_f/2, 3θ(p−1)!} (responsabilidade de quem chama).
    """
    if M <= 0:
        raise ConfigurationError("M deve ser positivo.")
    sub_opts = sub_opts or SubsolverOptions()
    space, x = _prepare(oracle, x0, space)
    p, alpha = oracle.order, params.alpha
    f, g = _evaluate(oracle, x)
    state = BasicState(x=x, f=f, grad=g, H=M)
    rec = _Recorder(RunRecord(method=MethodKind.TENSOR, p=p, alpha=alpha, H0=M), stop, space)

    try:
        done = rec.row(0, f, g, M, 0, 0, 0)
        while not done:
            model = RegularizedModel(_taylor(oracle, state.x, state.f, state.grad), M, alpha, space)
            trial = solve_model(model, state.f, sub_opts)
            state.oracle_calls += 1
            stationary = trial.step_norm == 0.0
            gnorm = dual_norm(space, trial.f_gradient)
            if not stationary and state.f - trial.f_value < descent_rhs(gnorm, M, p, alpha):
                return _descent_failure(rec, state.x, M, state.t)
            if callback:
                callback(_basic_info(state, trial, M, 0))
            state.x, state.f, state.grad = trial.point, trial.f_value, trial.f_gradient
            state.t += 1
            done = rec.row(state.t, state.f, state.grad, M, trial.inner_iters, 0, state.oracle_calls)
            if stationary:
                rec.record.status = RunStatus.CONVERGED
                done = True
    except HolderTensorError as exc:
        _attach_failure(rec, exc, state.x)
        raise
    return rec.finish(state.x)


def _basic_info(state: BasicState, trial: TrialPoint, M: float, i: int) -> IterationInfo:
    return IterationInfo(
        t=state.t,
        x=state.x,
        x_next=trial.point,
        center=state.x,
        f_center=state.f,
        f_prev=state.f,
        M=M,
        ls_trials=i,
        trial=trial,
    )


def run_adaptive_tensor(
    oracle: DerivativeOracle,
    params: SmoothnessParams,
    H0: float,
    stop: StoppingRule,
    sub_opts: SubsolverOptions | None = None,
    x0=None,
    space: MetricSpace | None = None,
    callback: Callback | None = None,
    max_doublings: int | None = None,
) -> RunRecord:
    """
    Método tensorial adaptativo: testa M = 2^i H_t, i = 0, 1, ... até o teste de
    descida passar e faz H_{t+1} = 2^{i_t − 1} H_t. H_t = H_0·2^{s_t} com s_t
    inteiro, logo O_T = 2T + log₂(H_T/H_0) vale exatamente.
    """
    if H0 <= 0:
        raise ConfigurationError("H0 deve ser positivo.")
    sub_opts = sub_opts or SubsolverOptions()
    cap = _max_doublings() if max_doublings is None else max_doublings
    space, x = _prepare(oracle, x0, space)
    p, alpha = oracle.order, params.alpha
    f, g = _evaluate(oracle, x)
    state = BasicState(x=x, f=f, grad=g, H=H0)
    rec = _Recorder(RunRecord(method=MethodKind.ADAPTIVE_TENSOR, p=p, alpha=alpha, H0=H0), stop, space)

    try:
        done = rec.row(0, f, g, H0, 0, 0, 0)
        while not done:
            taylor = _taylor(oracle, state.x, state.f, state.grad)
            accepted = None
            inner_total = 0
            for i in range(cap + 1):
                M = math.ldexp(H0, state.scale + i)
                state.oracle_calls += 1
                try:
                    trial = solve_model(RegularizedModel(taylor, M, alpha, space), state.f, sub_opts)
                except SubsolverStallError as exc:
                    logger.debug("Subproblema travou com M=%.4g; dobrando. (%s)", M, exc)
                    continue
                inner_total += trial.inner_iters
                gnorm = dual_norm(space, trial.f_gradient)
                if trial.step_norm == 0.0 or state.f - trial.f_value >= descent_rhs(gnorm, M, p, alpha):
                    accepted = (i, M, trial)
                    break
            if accepted is None:
                raise LineSearchBlowupError(f"Mais de {cap} duplicações de H em t={state.t}.", doublings=cap)

            i, M, trial = accepted
            if callback:
                callback(_basic_info(state, trial, M, i))
            state.scale += i - 1
            state.H = math.ldexp(H0, state.scale)
            state.x, state.f, state.grad = trial.point, trial.f_value, trial.f_gradient
            state.t += 1
            done = rec.row(state.t, state.f, state.grad, state.H, inner_total, i, state.oracle_calls)
            if trial.step_norm == 0.0:
                rec.record.status = RunStatus.CONVERGED
                done = True
    except HolderTensorError as exc:
        _attach_failure(rec, exc, state.x)
        raise
    return rec.finish(state.x)


# ==============================================================================
# ACELERADO (M FIXO E ADAPTATIVO)
# ==============================================================================


def _accelerated_trial(oracle, state: AcceleratedState, M: float, alpha: float, space, sub_opts):
    """Passos a_t, γ_t, y_t e o subproblema centrado em y_t para um M."""
    p = oracle.order
    a = solve_a_t(state.est.A, M, p, alpha)
    gamma = a / (state.est.A + a)
    y = (1.0 - gamma) * state.x + gamma * state.v
    f_y, g_y = _evaluate(oracle, y)
    trial = solve_model(RegularizedModel(_taylor(oracle, y, f_y, g_y), M, alpha, space), f_y, sub_opts)
    return a, gamma, y, f_y, trial


def _accelerated_test(trial: TrialPoint, y: np.ndarray, M: float, p: int, alpha: float, space) -> bool:
    if trial.step_norm == 0.0:
        return True
    lhs = float(np.dot(trial.f_gradient, y - trial.point))
    return lhs >= accelerated_descent_rhs(dual_norm(space, trial.f_gradient), M, p, alpha)


def _commit_accelerated(state: AcceleratedState, space, p, alpha, a, gamma, y, f_y, trial, M, i, callback) -> None:
    x_prev, v_prev, f_prev = state.x, state.v, state.f
    a_res = a_t_residual(a, state.est.A, M, p, alpha)
    state.est.absorb(a, trial.f_value, trial.f_gradient, trial.point)
    v = estimating_argmin(state.est, space)
    residual = argmin_residual(state.est, space, v)
    if residual > ARGMIN_TOL:
        raise NumericalError(f"argmin de ψ sem estacionariedade (resíduo {residual:.3e}).")
    state.x, state.f, state.grad, state.v = trial.point, trial.f_value, trial.f_gradient, v
    if callback:
        callback(
            IterationInfo(
                t=state.t,
                x=x_prev,
                x_next=trial.point,
                center=y,
                f_center=f_y,
                f_prev=f_prev,
                M=M,
                ls_trials=i,
                trial=trial,
                v=v_prev,
                v_next=v,
                a=a,
                gamma=gamma,
                A_next=state.est.A,
                est=state.est,
                a_residual=a_res,
                argmin_residual=residual,
            )
        )


def run_accelerated(
    oracle: DerivativeOracle,
    params: SmoothnessParams,
    M: float,
    stop: StoppingRule,
    sub_opts: SubsolverOptions | None = None,
    x0=None,
    space: MetricSpace | None = None,
    callback: Callback | None = None,
) -> RunRecord:
    """
    Método tensorial acelerado com M fixo: ψ_0(x) = ‖x − x0‖^{p+α}/(p+α),
    v_0 = x_0, A_0 = 0. Não é monótono em f; o RunRecord guarda o mínimo corrente.
    """
    if M <= 0:
        raise ConfigurationError("M deve ser positivo.")
    sub_opts = sub_opts or SubsolverOptions()
    space, x = _prepare(oracle, x0, space)
    p, alpha = oracle.order, params.alpha
    f, g = _evaluate(oracle, x)
    est = EstimatingSequence.start(x, p + alpha)
    state = AcceleratedState(x=x, v=x.copy(), f=f, grad=g, est=est, H=M)
    rec = _Recorder(RunRecord(method=MethodKind.ACCELERATED, p=p, alpha=alpha, H0=M), stop, space)

    try:
        done = rec.row(0, f, g, M, 0, 0, 0)
        while not done:
            a, gamma, y, f_y, trial = _accelerated_trial(oracle, state, M, alpha, space, sub_opts)
            state.oracle_calls += 1
            if not _accelerated_test(trial, y, M, p, alpha, space):
                return _descent_failure(rec, state.x, M, state.t)
            _commit_accelerated(state, space, p, alpha, a, gamma, y, f_y, trial, M, 0, callback)
            state.t += 1
            done = rec.row(state.t, state.f, state.grad, M, trial.inner_iters, 0, state.oracle_calls)
            if trial.step_norm == 0.0:
                rec.record.status = RunStatus.CONVERGED
                done = True
    except HolderTensorError as exc:
        _attach_failure(rec, exc, state.x)
        raise
    return rec.finish(state.x)


def run_adaptive_accelerated(
    oracle: DerivativeOracle,
    params: SmoothnessParams,
    H0: float,
    stop: StoppingRule,
    sub_opts: SubsolverOptions | None = None,
    x0=None,
    space: MetricSpace | None = None,
    callback: Callback | None = None,
    max_doublings: int | None = None,
) -> RunRecord:
    """
    Método acelerado adaptativo: para cada tentativa i recalcula a_{t,i}, γ_{t,i},
    y_{t,i}, resolve o subproblema e testa; na aceitação H_{t+1} = 2^{i_t−1}H_t.
    """
    if H0 <= 0:
        raise ConfigurationError("H0 deve ser positivo.")
    sub_opts = sub_opts or SubsolverOptions()
    cap = _max_doublings() if max_doublings is None else max_doublings
    space, x = _prepare(oracle, x0, space)
    p, alpha = oracle.order, params.alpha
    f, g = _evaluate(oracle, x)
    est = EstimatingSequence.start(x, p + alpha)
    state = AcceleratedState(x=x, v=x.copy(), f=f, grad=g, est=est, H=H0)
    rec = _Recorder(RunRecord(method=MethodKind.ADAPTIVE_ACCELERATED, p=p, alpha=alpha, H0=H0), stop, space)

    try:
        done = rec.row(0, f, g, H0, 0, 0, 0)
        while not done:
            accepted = None
            inner_total = 0
            for i in range(cap + 1):
                M = math.ldexp(H0, state.scale + i)
                state.oracle_calls += 1
                try:
                    a, gamma, y, f_y, trial = _accelerated_trial(oracle, state, M, alpha, space, sub_opts)
                except SubsolverStallError as exc:
                    logger.debug("Subproblema travou com M=%.4g; dobrando. (%s)", M, exc)
                    continue
                inner_total += trial.inner_iters
                if _accelerated_test(trial, y, M, p, alpha, space):
                    accepted = (i, M, a, gamma, y, f_y, trial)
                    break
            if accepted is None:
                raise LineSearchBlowupError(f"Mais de {cap} duplicações de H em t={state.t}.", doublings=cap)

            i, M, a, gamma, y, f_y, trial = accepted
            _commit_accelerated(state, space, p, alpha, a, gamma, y, f_y, trial, M, i, callback)
            state.scale += i - 1
            state.H = math.ldexp(H0, state.scale)
            state.t += 1
            done = rec.row(state.t, state.f, state.grad, state.H, inner_total, i, state.oracle_calls)
            if trial.step_norm == 0.0:
                rec.record.status = RunStatus.CONVERGED
                done = True
    except HolderTensorError as exc:
        _attach_failure(rec, exc, state.x)
        raise
    return rec.finish(state.x)


RUNNERS = {
    MethodKind.TENSOR: run_tensor,
    MethodKind.ADAPTIVE_TENSOR: run_adaptive_tensor,
    MethodKind.ACCELERATED: run_accelerated,
    MethodKind.ADAPTIVE_ACCELERATED: run_adaptive_accelerated,
}
