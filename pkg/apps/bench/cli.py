"""
Linha de comando do bench.

    manage.py run CONFIG.json [CONFIG.json ...]
    manage.py fit TRACE.csv
    manage.py compare TRACE.csv [--instance hard:n=11,k=5]
    manage.py plot TRACE.csv [...] -o DIR
    manage.py constants --p 2 --nu 1 --theta 0.1 --Hf 5.657 [--eps 1e-6]
    manage.py lowerbound --method adaptive-tensor [--n 11 --t-max 5]

Códigos de saída: 0 sucesso, 1 falha do método (ou violação), 2 erro de configuração.
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

from pydantic import ValidationError

from apps.core.exceptions import ConfigurationError
from apps.core.logs import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _print_json(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True, default=str))


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def parse_instance(text: str):
    """'hard:n=11,k=5' ou 'builtin:name=power-sum,n=4' → InstanceSpec."""
    from apps.bench.schemas import InstanceSpec

    kind, _, rest = text.partition(":")
    fields: dict = {"kind": kind}
    options: dict = {}
    for item in filter(None, rest.split(",")):
        key, _, value = item.partition("=")
        if key in ("n", "k"):
            fields[key] = int(value)
        elif key in ("name", "target"):
            fields[key] = value
        else:
            options[key] = float(value)
    if options:
        fields["options"] = options
    return InstanceSpec.model_validate(fields)


# ==============================================================================
# COMANDOS
# ==============================================================================


def cmd_run(args) -> int:
    from apps.bench.schemas import ExperimentConfig
    from apps.bench.services import run_experiment
    from config import settings

    configs = [ExperimentConfig.load(path) for path in args.configs]

    if settings.CELERY_BROKER_URL and not args.local:
        from apps.bench.tasks import run_experiment_task

        for cfg in configs:
            result = run_experiment_task.delay(cfg.model_dump_json())
            print(f"{cfg.resolved_output_dir()}\t{result.id}")
        return EXIT_OK

    code = EXIT_OK
    for cfg in configs:
        record = run_experiment(cfg)
        print(f"{cfg.resolved_output_dir()}\t{record.status}\t{record.iterations}")
        if record.status.failed:
            code = EXIT_FAILURE
    return code


def cmd_fit(args) -> int:
    from apps.bench.services import FitStatus, fit_rate, read_trace

    fit = fit_rate(read_trace(args.trace))
    _print_json(_clean(asdict(fit)))
    return EXIT_OK if fit.status == FitStatus.OK else EXIT_FAILURE


def _bound_report(trace: str, args):
    from apps.bench.registry import build_problem
    from apps.bench.schemas import RunParams
    from apps.bench.services import compare_bounds, load_config_beside, read_trace
    from apps.bench.theory import TheoryConstants
    from apps.space.models import MetricSpace
    from apps.space.services import primal_norm

    record = read_trace(trace)
    cfg = load_config_beside(trace)
    if cfg is None and not args.instance:
        raise ConfigurationError(f"{trace}: sem config.json ao lado; informe --instance.")
    params = cfg.params if cfg else RunParams(p=args.p, nu=args.nu, eps=1e-6)
    spec = parse_instance(args.instance) if args.instance else cfg.instance
    problem = build_problem(spec, params)
    if problem.holder is None and args.Hf is None:
        raise ConfigurationError("Instância sem H_f conhecido; informe --Hf.")

    constants = TheoryConstants(
        p=params.p,
        nu=params.nu,
        theta=params.theta,
        H_f=args.Hf if args.Hf is not None else problem.holder.constant,
        nu_known=params.nu_known,
        D0=args.D0 if args.D0 is not None else params.D0,
        R=args.R if args.R is not None else params.R,
    )
    x0_dist = None
    if problem.x_star is not None:
        x0_dist = primal_norm(MetricSpace.identity(problem.oracle.dim), problem.x0 - problem.x_star)
    return compare_bounds(
        record,
        problem.hard,
        record.method,
        constants,
        x0_dist=x0_dist,
        eps=params.eps,
    )


def cmd_compare(args) -> int:
    report = _bound_report(args.trace, args)
    _print_json(
        _clean(
            {
                "method": str(report.method),
                "partial": report.partial,
                "violations": len(report.violations),
                "rows": [asdict(row) for row in report.rows],
            }
        )
    )
    return EXIT_FAILURE if report.violations else EXIT_OK


def cmd_plot(args) -> int:
    from apps.bench.plots import emit_plots, envelopes_from_report
    from apps.bench.services import load_config_beside, read_trace

    records, envelopes, names = [], [], []
    for trace in args.traces:
        records.append(read_trace(trace))
        names.append(Path(trace).parent.name or Path(trace).stem)
        if load_config_beside(trace) is not None:
            envelopes.append(envelopes_from_report(_bound_report(trace, args)))
        else:
            envelopes.append({})
    for path in emit_plots(records, args.output, envelopes=envelopes, names=names):
        print(path)
    return EXIT_OK


def cmd_constants(args) -> int:
    from apps.bench.theory import TheoryConstants

    constants = TheoryConstants(
        p=args.p, nu=args.nu, theta=args.theta, H_f=args.Hf, nu_known=not args.universal, D0=args.D0, R=args.R
    )
    _print_json(_clean(constants.as_dict(eps=args.eps, delta=args.delta)))
    return EXIT_OK


def cmd_lowerbound(args) -> int:
    from apps.bench.services import check_lower_bound
    from apps.methods.models import MethodKind

    rows = check_lower_bound(
        MethodKind(args.method), p=args.p, nu=args.nu, n=args.n, t_max=args.t_max, theta=args.theta
    )
    _print_json(_clean([asdict(row) for row in rows]))
    return EXIT_OK if all(row.ok for row in rows) else EXIT_FAILURE


# ==============================================================================
# PARSER
# ==============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manage.py", description="Bancada de métodos tensoriais.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="executa experimentos a partir de configs JSON")
    run.add_argument("configs", nargs="+")
    run.add_argument("--local", action="store_true", help="ignora o broker e roda no processo")
    run.set_defaults(func=cmd_run)

    fit = sub.add_parser("fit", help="ajusta o expoente empírico de um trace")
    fit.add_argument("trace")
    fit.set_defaults(func=cmd_fit)

    def bound_args(p):
        p.add_argument("--instance", help="ex.: hard:n=11,k=5")
        p.add_argument("--p", type=int, default=2)
        p.add_argument("--nu", type=float, default=1.0)
        p.add_argument("--Hf", type=float)
        p.add_argument("--D0", type=float)
        p.add_argument("--R", type=float)

    compare = sub.add_parser("compare", help="compara um trace com os limitantes")
    compare.add_argument("trace")
    bound_args(compare)
    compare.set_defaults(func=cmd_compare)

    plot = sub.add_parser("plot", help="gera SVGs log-log")
    plot.add_argument("traces", nargs="+")
    plot.add_argument("-o", "--output", required=True)
    bound_args(plot)
    plot.set_defaults(func=cmd_plot)

    constants = sub.add_parser("constants", help="constantes teóricas")
    constants.add_argument("--p", type=int, required=True)
    constants.add_argument("--nu", type=float, required=True)
    constants.add_argument("--theta", type=float, required=True)
    constants.add_argument("--Hf", type=float, required=True)
    constants.add_argument("--eps", type=float)
    constants.add_argument("--R", type=float)
    constants.add_argument("--D0", type=float)
    constants.add_argument("--delta", type=float)
    constants.add_argument("--universal", action="store_true", help="ν desconhecido (α = 1)")
    constants.set_defaults(func=cmd_constants)

    lower = sub.add_parser("lowerbound", help="checa o envelope inferior em f_{2t+1}")
    lower.add_argument("--method", required=True, choices=["tensor", "adaptive-tensor", "accelerated", "adaptive-accelerated"])
    lower.add_argument("--p", type=int, default=2)
    lower.add_argument("--nu", type=float, default=1.0)
    lower.add_argument("--n", type=int, default=11)
    lower.add_argument("--t-max", type=int, default=5)
    lower.add_argument("--theta", type=float)
    lower.set_defaults(func=cmd_lowerbound)
    return parser


def main(argv=None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ConfigurationError) as exc:
        logger.error("Configuração inválida: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        logger.error("Erro de E/S: %s", exc)
        return EXIT_FAILURE
