import math

import numpy as np
import pytest

from apps.core.exceptions import ConfigurationError, UnsupportedOrderError
from apps.hardfn.services import hard_holder_bound, hard_holder_constant
from apps.oracle.builtins import LogSumExpOracle, PowerSumOracle, QuadraticOracle
from apps.oracle.models import RegularizedModel, SmoothnessParams, TaylorModel
from apps.oracle.services import (
    build_regularized_model,
    build_taylor_model,
    estimate_holder_constant,
    hessian_matrix,
    omega_gradient,
    omega_value,
    taylor_gradient,
    taylor_value,
)
from apps.space.models import MetricSpace


def central_gradient(fun, x, step=1e-6):
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (fun(x + e) - fun(x - e)) / (2 * step)
    return grad


class TestTaylorModel:
    def test_quadratic_taylor_is_exact(self, rng):
        """Para f quadrática e p=2 o modelo de Taylor coincide com f."""
        A = rng.standard_normal((5, 5))
        oracle = QuadraticOracle(A @ A.T, rng.standard_normal(5))
        model = build_taylor_model(oracle, rng.standard_normal(5))
        for _ in range(20):
            y = rng.standard_normal(5)
            assert taylor_value(model, y) == pytest.approx(oracle.value(y), rel=1e-12, abs=1e-12)
            np.testing.assert_allclose(taylor_gradient(model, y), oracle.gradient(y), rtol=1e-12, atol=1e-12)

    def test_center_values(self, f5_oracle, rng):
        x = rng.standard_normal(11)
        model = build_taylor_model(f5_oracle, x)
        assert taylor_value(model, x) == pytest.approx(f5_oracle.value(x))
        np.testing.assert_allclose(taylor_gradient(model, x), f5_oracle.gradient(x))

    def test_taylor_gradient_matches_finite_differences(self, rng):
        """∇Φ confere com diferenças centrais de Φ (p=3, log-sum-exp)."""
        oracle = LogSumExpOracle.random(4, 12, seed=3, order=3)
        model = build_taylor_model(oracle, rng.standard_normal(4))
        y = model.center + 0.3 * rng.standard_normal(4)
        fd = central_gradient(lambda z: taylor_value(model, z), y)
        np.testing.assert_allclose(taylor_gradient(model, y), fd, rtol=1e-6, atol=1e-8)

    def test_remainder_bounds_on_hard_function(self, f5_oracle, rng):
        """|f(y) − Φ(y)| ≤ (H/p!)‖y−x‖^{p+ν} e o análogo para o gradiente."""
        H = hard_holder_bound(2, 1.0)
        for _ in range(200):
            x = rng.standard_normal(11)
            y = x + 0.5 * rng.standard_normal(11)
            model = build_taylor_model(f5_oracle, x)
            r = np.linalg.norm(y - x)
            assert abs(f5_oracle.value(y) - taylor_value(model, y)) <= H / 2 * r**3 * (1 + 1e-9) + 1e-12
            gap = np.linalg.norm(f5_oracle.gradient(y) - taylor_gradient(model, y))
            assert gap <= H * r**2 * (1 + 1e-9) + 1e-12

    def test_rejects_unsupported_order(self, f5_oracle):
        with pytest.raises(UnsupportedOrderError):
            TaylorModel(oracle=f5_oracle, center=np.zeros(11), degree=4, f0=0.0, g0=np.zeros(11))


class TestRegularizedModel:
    def test_center_value_and_gradient(self, f5_oracle, space11, rng):
        x = rng.standard_normal(11)
        model = build_regularized_model(f5_oracle, x, H=10.0, alpha=1.0, space=space11)
        assert omega_value(model, x) == pytest.approx(f5_oracle.value(x))
        np.testing.assert_allclose(omega_gradient(model, x), f5_oracle.gradient(x))

    def test_pure_regularizer(self):
        """f = 0, p=2, α=1, H=2, ‖h‖=1: Ω = 1 e ∇Ω = (3, 0)."""
        oracle = QuadraticOracle(np.zeros((2, 2)), np.zeros(2))
        model = build_regularized_model(oracle, np.zeros(2), H=2.0, alpha=1.0, space=MetricSpace.identity(2))
        assert omega_value(model, [1.0, 0.0]) == pytest.approx(1.0)
        np.testing.assert_allclose(omega_gradient(model, [1.0, 0.0]), [3.0, 0.0])

    def test_omega_gradient_matches_finite_differences(self, f5_oracle, rng):
        """200 pontos sorteados, erro relativo ≤ 1e-6."""
        space = MetricSpace.diagonal(np.linspace(1.0, 2.0, 11))
        for i in range(200):
            alpha = (0.0, 0.5, 1.0)[i % 3]
            x = rng.standard_normal(11)
            model = build_regularized_model(f5_oracle, x, H=7.0, alpha=alpha, space=space)
            y = x + rng.standard_normal(11)
            fd = central_gradient(lambda z: omega_value(model, z), y)
            error = np.linalg.norm(omega_gradient(model, y) - fd)
            assert error <= 1e-6 * max(1.0, np.linalg.norm(fd))

    def test_model_upper_bounds_function(self, f5_oracle, space11, rng):
        """Com H acima da constante de Hölder e α=ν, f(y) ≤ Ω(y)."""
        H = hard_holder_bound(2, 1.0)
        x = rng.standard_normal(11)
        model = build_regularized_model(f5_oracle, x, H=H, alpha=1.0, space=space11)
        for _ in range(1000):
            y = x + rng.standard_normal(11) * rng.uniform(0.01, 3.0)
            assert f5_oracle.value(y) <= omega_value(model, y) + 1e-10

    def test_power_sum_upper_bound_with_hint(self, rng):
        oracle = PowerSumOracle(3, nu=0.5)
        hint = oracle.holder_hint
        x = rng.standard_normal(3)
        model = build_regularized_model(oracle, x, H=hint.constant, alpha=hint.nu, space=MetricSpace.identity(3))
        for _ in range(500):
            y = x + rng.standard_normal(3)
            assert oracle.value(y) <= omega_value(model, y) + 1e-12

    def test_invalid_parameters(self, f5_oracle, space11):
        taylor = build_taylor_model(f5_oracle, np.zeros(11))
        with pytest.raises(ConfigurationError):
            RegularizedModel(taylor=taylor, H=0.0, alpha=1.0, space=space11)
        with pytest.raises(ConfigurationError):
            RegularizedModel(taylor=taylor, H=1.0, alpha=1.5, space=space11)
        with pytest.raises(ConfigurationError):
            RegularizedModel(taylor=taylor, H=1.0, alpha=1.0, space=MetricSpace.identity(3))


class TestSmoothnessParams:
    def test_alpha_selection(self):
        assert SmoothnessParams(nu=0.5).alpha == 0.5
        assert SmoothnessParams(nu=0.5, nu_known=False).alpha == 1.0
        assert SmoothnessParams.universal().alpha == 1.0

    def test_rejects_nu_out_of_range(self):
        with pytest.raises(ConfigurationError):
            SmoothnessParams(nu=1.5)


class TestBuiltins:
    def test_hessian_symmetry(self, rng):
        oracle = LogSumExpOracle.random(6, 15, seed=1)
        x = rng.standard_normal(6)
        for _ in range(20):
            u, v = rng.standard_normal(6), rng.standard_normal(6)
            assert np.dot(oracle.hessian_apply(x, u), v) == pytest.approx(np.dot(oracle.hessian_apply(x, v), u))

    def test_log_sum_exp_derivatives(self, rng):
        oracle = LogSumExpOracle.random(5, 10, seed=2, mu=0.7, order=3)
        x = rng.standard_normal(5)
        np.testing.assert_allclose(oracle.gradient(x), central_gradient(oracle.value, x), rtol=1e-6, atol=1e-8)
        h = rng.standard_normal(5)
        step = 1e-5
        fd = (oracle.hessian_apply(x + step * h, h) - oracle.hessian_apply(x - step * h, h)) / (2 * step)
        np.testing.assert_allclose(oracle.third_apply(x, h), fd, rtol=1e-5, atol=1e-7)

    def test_hessian_matrix_of_quadratic(self, rng):
        A = rng.standard_normal((4, 4))
        Q = A @ A.T
        oracle = QuadraticOracle(Q, np.zeros(4))
        np.testing.assert_allclose(hessian_matrix(oracle, rng.standard_normal(4)), Q, atol=1e-12)


class TestHolderEstimate:
    def test_quadratic_is_zero(self, rng):
        A = rng.standard_normal((4, 4))
        oracle = QuadraticOracle(A @ A.T, np.ones(4))
        assert estimate_holder_constant(oracle, nu=0.7, sample_pairs=50, seed=0) == pytest.approx(0.0, abs=1e-9)

    def test_hard_function_estimate(self, f5_oracle):
        """Estimativa em f_5: abaixo do limitante rigoroso e ≥ metade do valor publicado."""
        estimate = estimate_holder_constant(f5_oracle, nu=1.0, sample_pairs=10_000, seed=7)
        assert estimate <= hard_holder_bound(2, 1.0) * (1 + 1e-9)
        assert estimate >= 0.5 * hard_holder_constant(2, 1.0)

    def test_printed_constant_is_exceeded(self, f5_oracle):
        """Par explícito cujo quociente ultrapassa 2^{3/2}·2."""
        x = np.zeros(11)
        x[1], x[2] = 1.0, -1.0
        diff = hessian_matrix(f5_oracle, x) - hessian_matrix(f5_oracle, np.zeros(11))
        quotient = np.linalg.norm(diff, 2) / math.sqrt(2.0)
        assert quotient >= 10 / math.sqrt(2.0)
        assert hard_holder_constant(2, 1.0) < quotient <= hard_holder_bound(2, 1.0)

    def test_one_dimensional_power(self):
        """Em 1-D a estimativa não passa do quociente analítico (1+ν)."""
        nu = 0.5
        oracle = PowerSumOracle(1, nu=nu)
        estimate = estimate_holder_constant(oracle, nu=nu, sample_pairs=2000, seed=4)
        grid = np.linspace(-3, 3, 601)
        hess = (1 + nu) * np.abs(grid) ** nu
        dist = np.abs(grid[:, None] - grid[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            quotient = np.abs(hess[:, None] - hess[None, :]) / dist**nu
        assert estimate <= (1 + nu) * (1 + 1e-9)
        assert np.nanmax(quotient[dist > 0]) <= (1 + nu) * (1 + 1e-9)
        assert estimate > 0.5

    def test_order_three_is_unsupported(self):
        with pytest.raises(UnsupportedOrderError):
            estimate_holder_constant(LogSumExpOracle.random(3, 5, seed=0, order=3), 1.0, 10, 0)
