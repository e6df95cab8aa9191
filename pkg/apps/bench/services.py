"""
Services do app bench: execução de experimentos, persistência dos artefatos,
ajuste de taxa empírica, comparação com limitantes e checagem do envelope
inferior.

Artefatos por execução (diretório próprio):
- trace.csv     colunas fixas TRACE_COLUMNS, floats com 17 dígitos significativos
- config.json   eco da configuração validada
- summary.json  status, contadores e resíduo final (sem tempos)
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np

from apps.bench.registry import Problem, build_problem, hard_problem
from apps.bench.schemas import ExperimentConfig
from apps.bench.theory import TheoryConstants
from apps.core.exceptions import ConfigurationError, HolderTensorError
from apps.hardfn.models import HardInstance
from apps.hardfn.services import hard_holder_bound, hard_holder_constant, lower_bound_envelope
from apps.methods.models import MethodKind, RunRecord, RunRow, RunStatus, StoppingRule
from apps.methods.services import (
    RUNNERS,
    accelerated_regularization_constant,
    fixed_regularization_constant,
)
from apps.oracle.models import SmoothnessParams
from apps.space.models import MetricSpace
from apps.space.services import primal_norm
from apps.subsolver.models import SubsolverOptions

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("t", "f", "residual", "grad_norm", "H", "inner_iters", "ls_trials", "oracle_calls", "wall_ns")
INT_COLUMNS = {"t", "inner_iters", "ls_trials", "oracle_calls", "wall_ns"}

MIN_FIT_POINTS = 10
MIN_WINDOW = 5
MAX_SHIFT = 10
R2_TIE = 1e-3


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


# ==============================================================================
# EXECUÇÃO
# ==============================================================================


def regularization_for(cfg: ExperimentConfig, problem: Problem) -> float:
    """H0 dos adaptativos ou M dos métodos de constante fixa."""
    params, kind = cfg.params, cfg.method.kind
    if kind.adaptive:
        return params.H0 if params.H0 is not None else 1.0
    if params.M is not None:
        return params.M
    hint = problem.holder
    if hint is None or hint.nu != params.nu:
        raise ConfigurationError(
            f"Método {kind} exige M explícito: a instância não informa H_f para ν={params.nu:g}."
        )
    if kind.accelerated:
        return accelerated_regularization_constant(params.nu, hint.constant, params.theta, params.p)
    return fixed_regularization_constant(params.nu, hint.constant, params.theta, params.p)


def execute(
    kind: MethodKind,
    problem: Problem,
    smoothness: SmoothnessParams,
    regularization: float,
    stop: StoppingRule,
    sub_opts: SubsolverOptions,
    callback=None,
) -> RunRecord:
    """Roda um método e devolve o RunRecord, inclusive o parcial de uma falha."""
    runner = RUNNERS[kind]
    try:
        return runner(
            problem.oracle,
            smoothness,
            regularization,
            stop,
            sub_opts,
            x0=problem.x0,
            space=MetricSpace.identity(problem.oracle.dim),
            callback=callback,
        )
    except ConfigurationError:
        raise
    except HolderTensorError as exc:
        record = getattr(exc, "record", None)
        if record is None:
            raise
        return record


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunRecord:
    params = cfg.params
    problem = build_problem(cfg.instance, params)
    if problem.oracle.order != params.p:
        raise ConfigurationError(f"Instância de ordem {problem.oracle.order} com p={params.p} na configuração.")
    smoothness = SmoothnessParams(nu=params.nu, nu_known=params.nu_known)
    regularization = regularization_for(cfg, problem)
    stop = StoppingRule(
        eps=params.eps,
        gtol=params.gtol,
        max_outer_iters=params.max_outer_iters,
        f_star=problem.f_star,
    )
    sub_opts = SubsolverOptions(theta=params.theta, max_inner_iters=params.max_inner_iters, mode=cfg.method.subsolver)

    logger.info("Iniciando %s em %s (M/H0=%.6g).", cfg.method.kind, problem.label or cfg.instance.slug, regularization)
    record = execute(cfg.method.kind, problem, smoothness, regularization, stop, sub_opts)

    if write:
        out_dir = cfg.resolved_output_dir()
        out_dir.mkdir(parents=True, exist_ok=True)
        write_trace(record, out_dir / "trace.csv", keep_wall_time=params.record_wall_time)
        (out_dir / "config.json").write_text(cfg.model_dump_json(indent=2) + "\n", encoding="utf-8")
        summary = summarize(record, problem, regularization)
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info("Artefatos gravados em %s", out_dir)
    return record


def summarize(record: RunRecord, problem: Problem, regularization: float) -> dict:
    best = [r for r in record.best_residuals() if not math.isnan(r)]
    last = record.rows[-1] if record.rows else None
    return {
        "method": str(record.method),
        "instance": problem.label,
        "status": str(record.status),
        "status_label": record.status.label,
        "message": record.message,
        "converged": record.converged,
        "iterations": record.iterations,
        "oracle_calls": record.oracle_calls,
        "p": record.p,
        "alpha": record.alpha,
        "regularization": regularization,
        "f_final": _finite_or_none(last.f) if last else None,
        "final_residual": _finite_or_none(record.final_residual),
        "best_residual": best[-1] if best else None,
        "H_final": _finite_or_none(last.H) if last else None,
    }


# ==============================================================================
# TRACE CSV
# ==============================================================================


def write_trace(record: RunRecord, path: Path, keep_wall_time: bool = False) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in record.rows:
            values = asdict(row)
            if not keep_wall_time:
                values["wall_ns"] = 0
            writer.writerow([str(values[c]) if c in INT_COLUMNS else _fmt(values[c]) for c in TRACE_COLUMNS])


def read_trace(path: str | Path) -> RunRecord:
    """
    Reconstrói um RunRecord a partir de trace.csv; método, p e α vêm de
    summary.json no mesmo diretório quando existir.
    """
    path = Path(path)
    rows: list[RunRow] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ConfigurationError(f"{path}: colunas inesperadas {reader.fieldnames}.")
        for raw in reader:
            rows.append(RunRow(**{c: int(raw[c]) if c in INT_COLUMNS else float(raw[c]) for c in TRACE_COLUMNS}))

    meta = {}
    summary_path = path.with_name("summary.json")
    if summary_path.exists():
        meta = json.loads(summary_path.read_text(encoding="utf-8"))
    return RunRecord(
        method=MethodKind(meta.get("method", MethodKind.ADAPTIVE_TENSOR)),
        p=int(meta.get("p", 2)),
        alpha=float(meta.get("alpha", 1.0)),
        H0=rows[0].H if rows else math.nan,
        rows=rows,
        status=RunStatus(meta.get("status", RunStatus.MAX_ITERS)),
        message=meta.get("message", ""),
    )


def load_config_beside(trace_path: str | Path) -> ExperimentConfig | None:
    config_path = Path(trace_path).with_name("config.json")
    return ExperimentConfig.load(config_path) if config_path.exists() else None


# ==============================================================================
# AJUSTE DE TAXA
# ==============================================================================


class FitStatus(StrEnum):
    OK = "ok"
    UNAVAILABLE = "unavailable"


@dataclass(frozen=True)
class RateFit:
    """residual ≈ C·(t − t_shift)^{−exponent} na janela [t_lo, t_hi]."""

    window: tuple[int, int]
    exponent: float
    r_squared: float
    t_shift: int
    points: int = 0
    status: FitStatus = FitStatus.OK

    @classmethod
    def unavailable(cls, points: int) -> "RateFit":
        return cls(window=(0, 0), exponent=math.nan, r_squared=math.nan, t_shift=0, points=points,
                   status=FitStatus.UNAVAILABLE)


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), min(max(r2, 0.0), 1.0)


def fit_rate(record: RunRecord) -> RateFit:
    """
    Mínimos quadrados de log(resíduo) contra log(t − m) sobre janelas finais
    (terminando no último ponto) com pelo menos MIN_WINDOW pontos e metade dos
    pontos disponíveis, m em {0..min(10, T/2)}. Vence o maior r²; diferenças
    abaixo de R2_TIE preferem m menor e janela mais longa.
    """
    t_all = np.array([row.t for row in record.rows], dtype=np.float64)
    r_all = np.array(record.best_residuals(), dtype=np.float64)
    mask = (t_all >= 1) & np.isfinite(r_all) & (r_all > 0)
    ts, rs = t_all[mask], r_all[mask]
    if ts.size < MIN_FIT_POINTS:
        return RateFit.unavailable(int(ts.size))

    best: RateFit | None = None
    max_shift = min(MAX_SHIFT, int(ts[-1]) // 2)
    for m in range(max_shift + 1):
        keep = ts - m >= 1
        tt, rr = ts[keep] - m, rs[keep]
        if tt.size < MIN_FIT_POINTS:
            continue
        x_all, y_all = np.log(tt), np.log(rr)
        shortest = max(MIN_WINDOW, math.ceil(tt.size / 2))
        for length in range(tt.size, shortest - 1, -1):
            slope, r2 = _linear_fit(x_all[-length:], y_all[-length:])
            if best is None or r2 > best.r_squared + R2_TIE:
                best = RateFit(
                    window=(int(tt[-length] + m), int(tt[-1] + m)),
                    exponent=-slope,
                    r_squared=r2,
                    t_shift=m,
                    points=length,
                )
    return best or RateFit.unavailable(int(ts.size))


# ==============================================================================
# LIMITANTES
# ==============================================================================


@dataclass(frozen=True)
class BoundRow:
    t: int
    observed: float
    upper: float | None
    lower: float | None
    lower_applicable: bool
    violation: bool


@dataclass
class BoundReport:
    method: MethodKind
    rows: list[BoundRow] = field(default_factory=list)
    partial: bool = False

    @property
    def violations(self) -> list[BoundRow]:
        return [row for row in self.rows if row.violation]


def _missing_surrogates(
    method_kind: MethodKind,
    constants: TheoryConstants,
    inst: HardInstance | None,
    x0_dist: float | None,
    eps: float | None,
) -> bool:
    """Algum substituto exigido pelos envelopes (D0, R(ε), ‖x0 − x*‖) faltou?"""
    if inst is not None and x0_dist is None:
        return True
    match method_kind:
        case MethodKind.TENSOR:
            return constants.D0 is None
        case MethodKind.ADAPTIVE_TENSOR:
            return constants.D0 is None or constants.N(eps) is None
        case MethodKind.ACCELERATED:
            return x0_dist is None
        case MethodKind.ADAPTIVE_ACCELERATED:
            return x0_dist is None or constants.N_tilde(eps) is None


def compare_bounds(
    record: RunRecord,
    inst: HardInstance | None,
    method_kind: MethodKind,
    constants: TheoryConstants,
    regularization: float | None = None,
    x0_dist: float | None = None,
    eps: float | None = None,
    transient: int = 0,
) -> BoundReport:
    """
    Resíduo observado (mínimo corrente) contra o envelope superior do método e
    o envelope inferior de f_k. O envelope inferior só se aplica em 2t+1 = k;
    nas demais linhas ele é informado mas não gera violação.
    """
    reg = record.H0 if regularization is None else regularization
    report = BoundReport(method=method_kind)
    report.partial = _missing_surrogates(method_kind, constants, inst, x0_dist, eps)
    printed_H = hard_holder_constant(constants.p, constants.nu) if inst is not None else None

    for row, observed in zip(record.rows, record.best_residuals(), strict=True):
        t = row.t
        if t < 1:
            continue
        match method_kind:
            case MethodKind.TENSOR:
                upper = constants.tensor_upper(t, reg, transient)
            case MethodKind.ADAPTIVE_TENSOR:
                upper = constants.adaptive_tensor_upper(t, reg, eps, transient)
            case MethodKind.ACCELERATED:
                upper = constants.accelerated_upper(t, reg, x0_dist)
            case MethodKind.ADAPTIVE_ACCELERATED:
                upper = constants.adaptive_accelerated_upper(t, reg, x0_dist, eps)
        lower = None
        applicable = False
        if inst is not None and x0_dist is not None:
            lower = lower_bound_envelope(constants.p, constants.nu, t, x0_dist, printed_H)
            applicable = 2 * t + 1 == inst.k
        violation = applicable and not math.isnan(observed) and observed < lower
        report.rows.append(BoundRow(t, observed, upper, lower, applicable, violation))

    if report.violations:
        logger.warning("%d violação(ões) do envelope inferior em %s.", len(report.violations), method_kind)
    return report


@dataclass(frozen=True)
class LowerBoundRow:
    t: int
    k: int
    observed: float
    envelope: float
    ok: bool
    status: RunStatus


def check_lower_bound(
    method_kind: MethodKind,
    p: int = 2,
    nu: float = 1.0,
    n: int = 11,
    t_max: int = 5,
    theta: float | None = None,
    regularization: float | None = None,
    sub_opts: SubsolverOptions | None = None,
) -> list[LowerBoundRow]:
    """
    Para cada t ≤ t_max com 2t+1 ≤ n roda o método t iterações em f_{2t+1}
    a partir de x0 = 0 e compara min_{j≤t} resíduo com o envelope em t.

    Sem regularization explícita: adaptativos partem de H0 = H_f publicado;
    os de constante fixa usam o limiar calculado com o limitante rigoroso.
    """
    if sub_opts is None:
        sub_opts = SubsolverOptions() if theta is None else SubsolverOptions(theta=theta)
    theta = sub_opts.theta
    smoothness = SmoothnessParams(nu=nu)
    printed_H = hard_holder_constant(p, nu)
    rigorous_H = hard_holder_bound(p, nu)
    rows = []
    for t in range(1, t_max + 1):
        k = 2 * t + 1
        if k > n:
            break
        problem = hard_problem(n, k, p, nu)
        if regularization is not None:
            reg = regularization
        elif method_kind.adaptive:
            reg = printed_H
        elif method_kind.accelerated:
            reg = accelerated_regularization_constant(nu, rigorous_H, theta, p)
        else:
            reg = fixed_regularization_constant(nu, rigorous_H, theta, p)
        stop = StoppingRule(gtol=0.0, max_outer_iters=t, f_star=problem.f_star)
        record = execute(method_kind, problem, smoothness, reg, stop, sub_opts)
        observed = min(r for r in record.best_residuals() if not math.isnan(r))
        x0_dist = primal_norm(MetricSpace.identity(n), problem.x0 - problem.x_star)
        envelope = lower_bound_envelope(p, nu, t, x0_dist, printed_H)
        rows.append(LowerBoundRow(t, k, observed, envelope, observed >= envelope, record.status))
        logger.info("t=%d k=%d resíduo=%.6e envelope=%.6e", t, k, observed, envelope)
    return rows
