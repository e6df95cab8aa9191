import math

import numpy as np
import pytest

from apps.core.exceptions import ConfigurationError, SubsolverStallError, UnsupportedOrderError
from apps.hardfn.services import hard_optimum
from apps.oracle.builtins import LogSumExpOracle, QuadraticOracle
from apps.oracle.services import build_regularized_model
from apps.space.models import MetricSpace
from apps.subsolver.models import SubsolverMode, SubsolverOptions
from apps.subsolver.services import (
    check_certificates,
    first_order_inner,
    resolve_mode,
    secular_solve_p2,
    solve_model,
)


def linear_model(g: float, H: float):
    """f(x) = g·x em 1-D (Hessiana nula), p=2, α=1."""
    oracle = QuadraticOracle([[0.0]], [-g])
    return build_regularized_model(oracle, [0.0], H=H, alpha=1.0, space=MetricSpace.identity(1))


class TestSolveModel:
    def test_stationary_center(self, f5, f5_oracle, space11, sub_opts):
        """∇f(x) = 0: x⁺ = x com passo nulo."""
        x_star, f_star = hard_optimum(f5)
        model = build_regularized_model(f5_oracle, x_star, H=10.0, alpha=1.0, space=space11)
        trial = solve_model(model, f_star, sub_opts)
        assert trial.step_norm == 0.0
        np.testing.assert_array_equal(trial.point, x_star)

    @pytest.mark.parametrize("mode", [SubsolverMode.SECULAR, SubsolverMode.FIRST_ORDER])
    def test_one_dimensional_closed_form(self, mode):
        """Para f linear, |h| = (2|g|/(3H))^{1/2} na direção −sign(g)."""
        g, H = 1.3, 2.0
        model = linear_model(g, H)
        opts = SubsolverOptions(theta=0.0, mode=mode)
        trial = solve_model(model, 0.0, opts)
        expected = -math.sqrt(2 * abs(g) / (3 * H))
        assert trial.point[0] == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
    def test_certificates_on_hard_function(self, f5_oracle, space11, sub_opts, rng, alpha):
        x = rng.standard_normal(11)
        f_center = f5_oracle.value(x)
        model = build_regularized_model(f5_oracle, x, H=20.0, alpha=alpha, space=space11)
        trial = solve_model(model, f_center, sub_opts)
        report = check_certificates(model, trial.point, f_center, sub_opts)
        assert report.value_ok and report.gradient_ok
        assert trial.f_value == pytest.approx(f5_oracle.value(trial.point))

    def test_secular_and_first_order_agree(self, f5_oracle, rng):
        """Os dois solvers encontram o mesmo minimizador (Ω convexo) a 1e-6."""
        space = MetricSpace.diagonal(np.linspace(1.0, 3.0, 11))
        for _ in range(3):
            x = rng.standard_normal(11)
            model = build_regularized_model(f5_oracle, x, H=15.0, alpha=1.0, space=space)
            secular = secular_solve_p2(model, SubsolverOptions(theta=1e-8))
            first = first_order_inner(model, SubsolverOptions(theta=1e-8))
            np.testing.assert_allclose(first.point, secular.point, atol=1e-6)

    def test_order_three_with_first_order(self, rng):
        oracle = LogSumExpOracle.random(5, 15, seed=11, order=3)
        space = MetricSpace.identity(5)
        x = rng.standard_normal(5)
        model = build_regularized_model(oracle, x, H=5.0, alpha=1.0, space=space)
        opts = SubsolverOptions(theta=0.1)
        assert resolve_mode(model, opts) == SubsolverMode.FIRST_ORDER
        trial = solve_model(model, oracle.value(x), opts)
        assert check_certificates(model, trial.point, oracle.value(x), opts).ok


class TestFirstOrderInner:
    def test_model_trace_is_monotone(self, f5_oracle, space11, rng):
        x = rng.standard_normal(11)
        model = build_regularized_model(f5_oracle, x, H=8.0, alpha=1.0, space=space11)
        trial = first_order_inner(model, SubsolverOptions(theta=1e-4))
        trace = np.array(trial.model_trace)
        assert trace.size >= 1
        assert np.all(np.diff(trace) <= 0.0)
        assert trace[0] < f5_oracle.value(x)

    def test_stall_carries_best_point(self, f5_oracle, space11, rng):
        """Teto de iterações internas: erro com o melhor iterado."""
        x = rng.standard_normal(11)
        model = build_regularized_model(f5_oracle, x, H=8.0, alpha=1.0, space=space11)
        with pytest.raises(SubsolverStallError) as exc_info:
            first_order_inner(model, SubsolverOptions(theta=0.0, max_inner_iters=1))
        best = exc_info.value.best
        assert best is not None
        assert best.model_value < f5_oracle.value(x)


class TestSecular:
    def test_rejects_order_three(self, rng):
        oracle = LogSumExpOracle.random(3, 6, seed=0, order=3)
        model = build_regularized_model(oracle, np.zeros(3), H=1.0, alpha=1.0, space=MetricSpace.identity(3))
        with pytest.raises(UnsupportedOrderError):
            secular_solve_p2(model)

    def test_dense_limit(self, f5_oracle, space11):
        model = build_regularized_model(f5_oracle, np.ones(11), H=1.0, alpha=1.0, space=space11)
        with pytest.raises(ConfigurationError):
            secular_solve_p2(model, SubsolverOptions(dense_limit=5))

    def test_auto_falls_back_above_dense_limit(self, f5_oracle, space11):
        model = build_regularized_model(f5_oracle, np.ones(11), H=1.0, alpha=1.0, space=space11)
        assert resolve_mode(model, SubsolverOptions(dense_limit=5)) == SubsolverMode.FIRST_ORDER
        assert resolve_mode(model, SubsolverOptions()) == SubsolverMode.SECULAR


class TestOptions:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            SubsolverOptions(theta=-1.0)
        with pytest.raises(ConfigurationError):
            SubsolverOptions(max_inner_iters=0)

    def test_defaults_come_from_settings(self, monkeypatch):
        from config import settings

        monkeypatch.setattr(settings, "DEFAULT_THETA", 0.25)
        assert SubsolverOptions().theta == 0.25
