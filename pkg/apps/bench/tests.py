import json
import math
from unittest.mock import patch

import numpy as np
import pytest
from pydantic import ValidationError

from apps.bench import cli
from apps.bench.plots import emit_plots, envelopes_from_report
from apps.bench.registry import build_problem, hard_problem, load_plugin, register_instance
from apps.bench.schemas import ExperimentConfig, InstanceSpec, RunParams
from apps.bench.services import (
    TRACE_COLUMNS,
    FitStatus,
    check_lower_bound,
    compare_bounds,
    fit_rate,
    read_trace,
    regularization_for,
    run_experiment,
    write_trace,
)
from apps.bench.tasks import run_experiment_task
from apps.bench.theory import TheoryConstants
from apps.core.exceptions import ConfigurationError
from apps.hardfn.services import hard_holder_bound
from apps.methods.models import MethodKind, RunRecord, RunRow, RunStatus, StoppingRule
from apps.methods.services import (
    accelerated_regularization_constant,
    run_accelerated,
    run_adaptive_accelerated,
    run_adaptive_tensor,
)
from apps.oracle.builtins import PowerSumOracle
from apps.oracle.models import SmoothnessParams


def make_config(**overrides) -> dict:
    data = {
        "instance": {"kind": "hard", "n": 11, "k": 5},
        "method": {"kind": "adaptive-tensor"},
        "params": {"p": 2, "nu": 1.0, "eps": 1e-6, "max_outer_iters": 200},
    }
    for key, value in overrides.items():
        data[key] = {**data[key], **value} if isinstance(value, dict) else value
    return data


def write_config(tmp_path, name="cfg.json", **overrides):
    path = tmp_path / name
    path.write_text(json.dumps(make_config(**overrides)), encoding="utf-8")
    return path


def synthetic_record(residuals, method=MethodKind.ADAPTIVE_TENSOR) -> RunRecord:
    rows = [
        RunRow(t=t, f=r, residual=r, grad_norm=1.0, H=1.0, inner_iters=0, ls_trials=0, oracle_calls=2 * t, wall_ns=0)
        for t, r in enumerate(residuals)
    ]
    return RunRecord(method=method, p=2, alpha=1.0, H0=1.0, rows=rows, status=RunStatus.MAX_ITERS)


class TestSchemas:
    def test_valid_config(self):
        cfg = ExperimentConfig.model_validate(make_config())
        assert cfg.method.kind == MethodKind.ADAPTIVE_TENSOR
        assert cfg.instance.slug == "hard-n11-k5"

    def test_round_trip_through_json(self):
        cfg = ExperimentConfig.model_validate(make_config())
        assert ExperimentConfig.model_validate_json(cfg.model_dump_json()) == cfg

    @pytest.mark.parametrize(
        "overrides",
        [
            {"params": {"nu": 1.5}},
            {"params": {"p": 4}},
            {"params": {"eps": None}},
            {"params": {"eps": 1.0}},
            {"params": {"typo": 1}},
            {"instance": {"k": 12}},
            {"instance": {"kind": "plugin"}},
            {"method": {"kind": "newton"}},
        ],
    )
    def test_invalid_configs(self, overrides):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(make_config(**overrides))

    def test_builtin_requires_name(self):
        with pytest.raises(ValidationError):
            InstanceSpec(kind="builtin")

    def test_default_output_dir(self, output_root):
        cfg = ExperimentConfig.model_validate(make_config(params={"seed": 3}))
        assert cfg.resolved_output_dir() == output_root / "adaptive-tensor-hard-n11-k5-seed3"

    def test_theta_default_from_settings(self, monkeypatch):
        from config import settings

        monkeypatch.setattr(settings, "DEFAULT_THETA", 0.25)
        assert RunParams(eps=1e-3).theta == 0.25


class TestRegistry:
    def test_builtins(self):
        params = RunParams(eps=1e-6)
        for name in ("quadratic", "power-sum", "log-sum-exp"):
            problem = build_problem(InstanceSpec(kind="builtin", name=name, n=4), params)
            assert problem.oracle.dim == 4

    def test_unknown_builtin(self):
        with pytest.raises(ConfigurationError):
            build_problem(InstanceSpec(kind="builtin", name="rosenbrock"), RunParams(eps=1e-6))

    def test_plugin(self):
        spec = InstanceSpec(kind="plugin", target="apps.bench.registry:power_sum", options={"n": 3})
        problem = build_problem(spec, RunParams(eps=1e-6, nu=0.5))
        assert problem.oracle.dim == 3
        assert problem.holder.constant == pytest.approx(1.5)

    def test_plugin_errors(self):
        with pytest.raises(ConfigurationError):
            load_plugin("apps.nao_existe:fabrica")
        with pytest.raises(ConfigurationError):
            load_plugin("apps.bench.registry:nao_existe")

    def test_duplicate_registration(self):
        with pytest.raises(ConfigurationError):
            register_instance("quadratic")(lambda **kw: None)

    def test_x0_override(self):
        problem = build_problem(InstanceSpec(kind="hard", n=3, k=2), RunParams(eps=1e-6, x0=[1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(problem.x0, [1.0, 2.0, 3.0])
        assert problem.hard.k == 2

    def test_fixed_method_needs_constant(self):
        cfg = ExperimentConfig.model_validate(
            make_config(instance={"kind": "builtin", "name": "log-sum-exp", "n": None, "k": None},
                        method={"kind": "tensor"}, params={"gtol": 1e-6})
        )
        problem = build_problem(cfg.instance, cfg.params)
        with pytest.raises(ConfigurationError):
            regularization_for(cfg, problem)

    def test_fixed_method_uses_hint(self):
        cfg = ExperimentConfig.model_validate(make_config(method={"kind": "accelerated"}))
        problem = build_problem(cfg.instance, cfg.params)
        expected = accelerated_regularization_constant(1.0, hard_holder_bound(2, 1.0), cfg.params.theta, 2)
        assert regularization_for(cfg, problem) == pytest.approx(expected)


class TestRunExperiment:
    def test_artifacts(self, output_root):
        cfg = ExperimentConfig.model_validate(make_config())
        record = run_experiment(cfg)
        out = cfg.resolved_output_dir()
        assert record.converged
        header = (out / "trace.csv").read_text(encoding="utf-8").splitlines()[0]
        assert tuple(header.split(",")) == TRACE_COLUMNS
        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        assert summary["status"] == "converged"
        assert summary["iterations"] == record.iterations
        assert ExperimentConfig.load(out / "config.json") == cfg

    def test_deterministic_outputs(self, output_root):
        first = ExperimentConfig.model_validate(make_config(output_dir="a"))
        second = ExperimentConfig.model_validate(make_config(output_dir="b"))
        run_experiment(first)
        run_experiment(second)
        for name in ("trace.csv", "summary.json"):
            assert (output_root / "a" / name).read_bytes() == (output_root / "b" / name).read_bytes()

    def test_trace_round_trip(self, output_root):
        cfg = ExperimentConfig.model_validate(make_config())
        record = run_experiment(cfg)
        loaded = read_trace(cfg.resolved_output_dir() / "trace.csv")
        assert loaded.method == MethodKind.ADAPTIVE_TENSOR
        assert loaded.status == record.status
        assert [row.f for row in loaded.rows] == [row.f for row in record.rows]
        assert all(row.wall_ns == 0 for row in loaded.rows)

    def test_failure_is_recorded(self, output_root):
        cfg = ExperimentConfig.model_validate(make_config(method={"kind": "tensor"}, params={"M": 1e-3}))
        record = run_experiment(cfg)
        assert record.status == RunStatus.DESCENT_FAILURE
        summary = json.loads((cfg.resolved_output_dir() / "summary.json").read_text(encoding="utf-8"))
        assert summary["status"] == "descent_failure"


class TestFitRate:
    def test_exact_power_law(self):
        fit = fit_rate(synthetic_record([200.0] + [100.0 * t**-3.0 for t in range(1, 60)]))
        assert fit.status == FitStatus.OK
        assert fit.exponent == pytest.approx(3.0, abs=0.01)
        assert fit.t_shift == 0

    def test_noisy_power_law(self, rng):
        noise = np.exp(0.01 * rng.standard_normal(120))
        fit = fit_rate(synthetic_record([10.0] + [5.0 * t**-2.0 * noise[t] for t in range(1, 120)]))
        assert fit.exponent == pytest.approx(2.0, abs=0.1)

    def test_flat_residual(self):
        fit = fit_rate(synthetic_record([1.0] * 30))
        assert fit.status == FitStatus.OK
        assert fit.r_squared == 1.0
        assert fit.exponent == pytest.approx(0.0, abs=1e-9)

    def test_too_few_points(self):
        fit = fit_rate(synthetic_record([1.0 / (t + 1) for t in range(10)]))
        assert fit.status == FitStatus.UNAVAILABLE
        assert math.isnan(fit.exponent)

    def test_adaptive_tensor_rate(self, sub_opts):
        """Σ|x_i|³/3 a partir de x0 = 10·𝟙: convergência geométrica, ao menos 12 resíduos positivos."""
        oracle = PowerSumOracle(dim=4, nu=1.0)
        stop = StoppingRule(eps=1e-8, f_star=0.0, max_outer_iters=300)
        record = run_adaptive_tensor(oracle, SmoothnessParams(nu=1.0), 1.0, stop, sub_opts, x0=np.full(4, 10.0))
        assert record.converged
        fit = fit_rate(record)
        assert fit.status == FitStatus.OK
        assert fit.exponent >= 1.7
        assert fit.r_squared >= 0.9

    def test_adaptive_accelerated_rate(self, f5_oracle, sub_opts):
        stop = StoppingRule(eps=1e-8, f_star=-10.0 / 3.0, max_outer_iters=2000)
        record = run_adaptive_accelerated(f5_oracle, SmoothnessParams(nu=1.0), 1.0, stop, sub_opts)
        assert record.converged
        fit = fit_rate(record)
        assert fit.status == FitStatus.OK
        assert fit.exponent >= 2.7
        assert fit.r_squared >= 0.9


class TestBounds:
    def _record(self, f5_oracle, sub_opts):
        stop = StoppingRule(eps=1e-6, f_star=-10.0 / 3.0, max_outer_iters=100)
        return run_adaptive_tensor(f5_oracle, SmoothnessParams(nu=1.0), 1.0, stop, sub_opts)

    def test_partial_without_surrogates(self, f5, f5_oracle, sub_opts):
        constants = TheoryConstants(p=2, nu=1.0, theta=0.1, H_f=hard_holder_bound(2, 1.0))
        report = compare_bounds(self._record(f5_oracle, sub_opts), f5, MethodKind.ADAPTIVE_TENSOR, constants)
        assert report.partial
        assert all(row.lower is None and not row.lower_applicable for row in report.rows)

    @pytest.mark.parametrize("kind", [MethodKind.ACCELERATED, MethodKind.ADAPTIVE_ACCELERATED])
    def test_accelerated_complete_report(self, f5, kind):
        """Sem envelope em t=1 por fórmula; com todos os substitutos o relatório é completo."""
        constants = TheoryConstants(p=2, nu=1.0, theta=0.1, H_f=hard_holder_bound(2, 1.0), D0=3.0)
        record = synthetic_record([10.0] * 6, method=kind)
        report = compare_bounds(record, f5, kind, constants, x0_dist=3.0, eps=1e-6)
        assert report.rows[0].t == 1 and report.rows[0].upper is None
        assert all(row.upper is not None for row in report.rows[1:])
        assert not report.partial
        assert compare_bounds(record, f5, kind, constants, eps=1e-6).partial

    def test_lower_envelope_applies_only_at_matching_k(self, f5, f5_oracle, sub_opts):
        problem = hard_problem(11, 5, 2, 1.0)
        x0_dist = float(np.linalg.norm(problem.x_star))
        constants = TheoryConstants(p=2, nu=1.0, theta=0.1, H_f=hard_holder_bound(2, 1.0), D0=x0_dist)
        report = compare_bounds(
            self._record(f5_oracle, sub_opts), f5, MethodKind.ADAPTIVE_TENSOR, constants, x0_dist=x0_dist, eps=1e-6
        )
        assert [row.t for row in report.rows if row.lower_applicable] == [2]
        assert not report.violations
        assert all(row.upper is not None for row in report.rows)
        for row in report.rows:
            assert row.observed <= row.upper

    @pytest.mark.parametrize("kind", list(MethodKind))
    def test_lower_bound_holds(self, kind):
        rows = check_lower_bound(kind, t_max=5)
        assert [row.k for row in rows] == [3, 5, 7, 9, 11]
        assert all(row.ok for row in rows)

    def test_lower_bound_stops_at_dimension(self):
        rows = check_lower_bound(MethodKind.ADAPTIVE_TENSOR, n=5, t_max=5)
        assert [row.t for row in rows] == [1, 2]


class TestTheory:
    def test_thresholds(self):
        constants = TheoryConstants(p=2, nu=1.0, theta=0.1, H_f=2.0)
        assert constants.fixed_threshold == pytest.approx(3.0)
        assert constants.accelerated_threshold == pytest.approx(4.2)
        assert constants.N() == pytest.approx(3.0)
        assert constants.tensor_upper(5, 3.0) is None

    def test_universal_requires_R(self):
        constants = TheoryConstants(p=2, nu=1.0, theta=0.1, H_f=2.0, nu_known=False)
        assert constants.alpha == 1.0
        assert constants.N(1e-3) is None
        with_R = TheoryConstants(p=2, nu=1.0, theta=0.1, H_f=2.0, nu_known=False, R=4.0)
        assert with_R.N(1e-3) == pytest.approx(3.0)
        assert constants.xi(0.5) == pytest.approx(3.0)

    def test_near_optimality(self):
        for p in (2, 3, 4):
            for nu in (0.0, 0.25, 0.5, 0.75, 1.0):
                for eps in (1e-2, 1e-6, 1e-12):
                    check = TheoryConstants(p=p, nu=nu, theta=0.1, H_f=1.0).near_optimality(eps)
                    assert check["within_ceiling"]
        assert TheoryConstants(p=2, nu=1.0, theta=0.1, H_f=1.0).near_optimality(1e-6)["within_factor_6"]

    def test_oracle_call_bound_holds(self, f5, f5_oracle, sub_opts):
        H_f = hard_holder_bound(2, 1.0)
        stop = StoppingRule(eps=1e-6, f_star=-10.0 / 3.0, max_outer_iters=200)
        record = run_adaptive_tensor(f5_oracle, SmoothnessParams(nu=1.0), 1.0, stop, sub_opts)
        bound = TheoryConstants(p=2, nu=1.0, theta=0.1, H_f=H_f).oracle_call_bound(record.iterations, 1.0)
        assert record.oracle_calls <= bound

    def test_accumulated_weight_growth(self, f5, f5_oracle, sub_opts):
        constants = TheoryConstants(p=2, nu=1.0, theta=0.1, H_f=hard_holder_bound(2, 1.0))
        M = constants.accelerated_threshold
        seen = []
        stop = StoppingRule(eps=1e-6, f_star=-10.0 / 3.0, max_outer_iters=50)
        run_accelerated(f5_oracle, SmoothnessParams(nu=1.0), M, stop, sub_opts,
                        callback=lambda info: seen.append((info.t + 1, info.A_next)))
        assert seen
        for t, A in seen:
            assert A >= constants.a_growth_lower(t, M)

    def test_as_dict(self):
        data = TheoryConstants(p=2, nu=0.5, theta=0.1, H_f=1.0).as_dict(eps=1e-4, delta=0.1)
        assert {"N", "N_tilde", "xi", "near_optimality"} <= data.keys()


class TestPlots:
    def test_svg_written(self, tmp_path):
        record = synthetic_record([1.0 / (t + 1) ** 2 for t in range(20)])
        envelopes = [{"teto": [(t, 2.0 / t) for t in range(1, 20)]}]
        paths = emit_plots([record], tmp_path, envelopes=envelopes, names=["quadratica"])
        assert paths == [tmp_path / "quadratica.svg"]
        assert "<svg" in paths[0].read_text(encoding="utf-8")

    def test_empty_series_skipped(self, tmp_path):
        record = synthetic_record([math.nan] * 5)
        assert emit_plots([record], tmp_path) == []

    def test_envelopes_from_report(self, f5, f5_oracle, sub_opts):
        record = synthetic_record([1.0 / (t + 1) for t in range(6)])
        constants = TheoryConstants(p=2, nu=1.0, theta=0.1, H_f=1.0, D0=5.0)
        report = compare_bounds(record, f5, MethodKind.ADAPTIVE_TENSOR, constants, x0_dist=5.0, eps=1e-6)
        curves = envelopes_from_report(report)
        assert len(curves["envelope superior"]) == 5
        assert len(curves["envelope inferior"]) == 5


class TestTasks:
    def test_task_runs_in_process(self, output_root):
        cfg = ExperimentConfig.model_validate(make_config(output_dir="via-task"))
        result = run_experiment_task(cfg.model_dump_json())
        assert result["status"] == "converged"
        assert (output_root / "via-task" / "trace.csv").exists()


class TestCli:
    def test_run_local(self, tmp_path, output_root, capsys):
        path = write_config(tmp_path, output_dir="cli")
        assert cli.main(["run", str(path), "--local"]) == cli.EXIT_OK
        assert "converged" in capsys.readouterr().out
        assert (output_root / "cli" / "summary.json").exists()

    def test_run_failure_exit_code(self, tmp_path, output_root):
        path = write_config(tmp_path, method={"kind": "tensor"}, params={"M": 1e-3})
        assert cli.main(["run", str(path), "--local"]) == cli.EXIT_FAILURE

    @pytest.mark.parametrize("overrides", [{"params": {"nu": 1.5}}, {"params": {"chave": 1}}])
    def test_invalid_config_exit_code(self, tmp_path, output_root, overrides):
        path = write_config(tmp_path, **overrides)
        assert cli.main(["run", str(path), "--local"]) == cli.EXIT_CONFIG

    def test_run_dispatches_to_celery(self, tmp_path, output_root, monkeypatch, capsys):
        from config import settings

        monkeypatch.setattr(settings, "CELERY_BROKER_URL", "redis://localhost:6379/0")
        path = write_config(tmp_path, output_dir="fila")
        with patch("apps.bench.tasks.run_experiment_task") as task:
            task.delay.return_value.id = "task-123"
            assert cli.main(["run", str(path)]) == cli.EXIT_OK
        sent = ExperimentConfig.model_validate_json(task.delay.call_args.args[0])
        assert sent.output_dir == "fila"
        assert "task-123" in capsys.readouterr().out
        assert not (output_root / "fila").exists()

    def test_fit(self, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        write_trace(synthetic_record([200.0] + [100.0 * t**-3.0 for t in range(1, 40)]), trace)
        assert cli.main(["fit", str(trace)]) == cli.EXIT_OK
        assert json.loads(capsys.readouterr().out)["exponent"] == pytest.approx(3.0, abs=0.01)

    def test_compare_and_plot(self, tmp_path, output_root, capsys):
        path = write_config(tmp_path, output_dir="cmp")
        cli.main(["run", str(path), "--local"])
        trace = output_root / "cmp" / "trace.csv"
        capsys.readouterr()
        assert cli.main(["compare", str(trace)]) == cli.EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["violations"] == 0
        assert cli.main(["plot", str(trace), "-o", str(tmp_path / "svg")]) == cli.EXIT_OK
        assert (tmp_path / "svg" / "cmp.svg").exists()

    def test_compare_without_config_needs_instance(self, tmp_path):
        trace = tmp_path / "trace.csv"
        write_trace(synthetic_record([10.0] * 12), trace)
        assert cli.main(["compare", str(trace)]) == cli.EXIT_CONFIG
        assert cli.main(["compare", str(trace), "--instance", "hard:n=11,k=5"]) == cli.EXIT_OK

    def test_constants(self, capsys):
        argv = ["constants", "--p", "2", "--nu", "1", "--theta", "0.1", "--Hf", "2", "--eps", "1e-6"]
        assert cli.main(argv) == cli.EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data["fixed_threshold"] == pytest.approx(3.0)
        assert data["near_optimality"]["within_ceiling"] is True

    def test_constants_rejects_invalid_nu(self):
        argv = ["constants", "--p", "2", "--nu", "2", "--theta", "0.1", "--Hf", "2"]
        assert cli.main(argv) == cli.EXIT_CONFIG

    def test_lowerbound(self, capsys):
        assert cli.main(["lowerbound", "--method", "tensor", "--t-max", "2"]) == cli.EXIT_OK
        assert len(json.loads(capsys.readouterr().out)) == 2

    def test_parse_instance(self):
        spec = cli.parse_instance("builtin:name=quadratic,n=4,cond=10")
        assert spec.name == "quadratic" and spec.n == 4 and spec.options == {"cond": 10.0}
        with pytest.raises(ValidationError):
            cli.parse_instance("hard:n=3")
