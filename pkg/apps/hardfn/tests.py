import numpy as np
import pytest

from apps.core.exceptions import ConfigurationError, SingularDerivativeError, UnsupportedOrderError
from apps.hardfn.models import BandedDifference, HardForm, HardInstance
from apps.hardfn.services import (
    HardOracle,
    hard_gradient,
    hard_hessian_apply,
    hard_holder_bound,
    hard_holder_constant,
    hard_optimum,
    hard_third_apply,
    hard_value,
    lower_bound_constant,
    lower_bound_envelope,
    support_size,
)


class TestHardInstance:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            HardInstance(n=5, k=1)
        with pytest.raises(ConfigurationError):
            HardInstance(n=5, k=6)
        with pytest.raises(ConfigurationError):
            HardInstance(n=5, k=3, nu=1.5)

    def test_oracle_orders(self):
        HardOracle(HardInstance(n=6, k=3, p=3))
        with pytest.raises(UnsupportedOrderError):
            HardOracle(HardInstance(n=6, k=3, p=4))

    def test_oracle_hint_uses_provable_bound(self, f5_oracle):
        assert f5_oracle.holder_hint.nu == 1.0
        assert f5_oracle.holder_hint.constant == pytest.approx(hard_holder_bound(2, 1.0))


class TestEvaluation:
    def test_forms_agree(self, rng):
        for p, nu in ((2, 1.0), (2, 0.3), (3, 0.0), (3, 1.0)):
            inst = HardInstance(n=9, k=6, p=p, nu=nu)
            for _ in range(10):
                x = rng.standard_normal(9)
                explicit = hard_value(inst, x, HardForm.EXPLICIT)
                factored = hard_value(inst, x, HardForm.FACTORED)
                assert explicit == pytest.approx(factored, rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("nu", [0.5, 1.0])
    def test_gradient_matches_finite_differences(self, rng, nu):
        """200 pontos sorteados, erro relativo ≤ 1e-6."""
        inst = HardInstance(n=7, k=5, p=2, nu=nu)
        step = 1e-6
        for _ in range(200):
            x = rng.standard_normal(7)
            fd = np.array(
                [(hard_value(inst, x + step * e) - hard_value(inst, x - step * e)) / (2 * step) for e in np.eye(7)]
            )
            error = np.linalg.norm(hard_gradient(inst, x) - fd)
            assert error <= 1e-6 * max(1.0, np.linalg.norm(fd))

    def test_hessian_is_symmetric(self, rng):
        inst = HardInstance(n=8, k=6, p=2, nu=0.7)
        x = rng.standard_normal(8)
        cols = np.column_stack([hard_hessian_apply(inst, x, e) for e in np.eye(8)])
        np.testing.assert_allclose(cols, cols.T, atol=1e-12)
        assert np.linalg.eigvalsh(cols).min() >= -1e-12

    def test_hessian_matches_gradient_differences(self, rng):
        inst = HardInstance(n=6, k=4, p=2, nu=1.0)
        x, h = rng.standard_normal(6), rng.standard_normal(6)
        step = 1e-6
        fd = (hard_gradient(inst, x + step * h) - hard_gradient(inst, x - step * h)) / (2 * step)
        np.testing.assert_allclose(hard_hessian_apply(inst, x, h), fd, rtol=1e-5, atol=1e-7)

    def test_third_derivative_matches_hessian_differences(self, rng):
        inst = HardInstance(n=6, k=4, p=3, nu=1.0)
        x, h = rng.standard_normal(6), rng.standard_normal(6)
        step = 1e-5
        fd = (hard_hessian_apply(inst, x + step * h, h) - hard_hessian_apply(inst, x - step * h, h)) / (2 * step)
        np.testing.assert_allclose(hard_third_apply(inst, x, h), fd, rtol=1e-5, atol=1e-7)

    def test_third_derivative_vanishes_for_quadratic_power(self, rng):
        inst = HardInstance(n=5, k=3, p=2, nu=0.0)
        np.testing.assert_array_equal(hard_third_apply(inst, np.zeros(5), rng.standard_normal(5)), 0.0)

    def test_third_derivative_singular_at_zero(self):
        inst = HardInstance(n=5, k=3, p=2, nu=0.5)
        with pytest.raises(SingularDerivativeError):
            hard_third_apply(inst, np.zeros(5), np.ones(5))

    def test_convexity(self, rng):
        inst = HardInstance(n=10, k=7, p=2, nu=0.4)
        for _ in range(50):
            x, y = rng.standard_normal(10), rng.standard_normal(10)
            lam = rng.uniform()
            mid = hard_value(inst, lam * x + (1 - lam) * y)
            assert mid <= lam * hard_value(inst, x) + (1 - lam) * hard_value(inst, y) + 1e-12

    def test_larger_k_agrees_on_short_support(self, rng):
        """Com suporte nos k primeiros índices, f_m(x) = f_k(x) para todo m ≥ k."""
        x = np.zeros(12)
        x[:4] = rng.standard_normal(4)
        base = hard_value(HardInstance(n=12, k=4), x)
        for m in range(5, 13):
            assert hard_value(HardInstance(n=12, k=m), x) == pytest.approx(base, rel=1e-12)


class TestOperator:
    @pytest.mark.parametrize("k,n", [(2, 2), (5, 11), (40, 60)])
    def test_norm_at_most_two(self, k, n):
        norm = BandedDifference(k=k, n=n).operator_norm()
        assert 1.0 <= norm <= 2.0 + 1e-12

    def test_transpose(self, rng):
        A = BandedDifference(k=5, n=8)
        x, u = rng.standard_normal(8), rng.standard_normal(8)
        assert np.dot(A.apply(x), u) == pytest.approx(np.dot(x, A.apply_transpose(u)), rel=1e-12)


class TestOptimum:
    def test_known_value(self):
        x_star, f_star = hard_optimum(HardInstance(n=6, k=3, p=2, nu=0.5))
        np.testing.assert_array_equal(x_star, [3, 2, 1, 0, 0, 0])
        assert f_star == pytest.approx(-1.8)

    @pytest.mark.parametrize("p,nu", [(2, 1.0), (2, 0.0), (3, 0.5)])
    def test_stationary_and_consistent(self, p, nu):
        inst = HardInstance(n=9, k=5, p=p, nu=nu)
        x_star, f_star = hard_optimum(inst)
        np.testing.assert_allclose(hard_gradient(inst, x_star), 0.0, atol=1e-12)
        assert hard_value(inst, x_star) == pytest.approx(f_star, rel=1e-12)

    def test_support_size(self):
        assert support_size(np.zeros(4)) == 0
        assert support_size([1.0, 0.0, 1e-9, 0.0]) == 1
        assert support_size([0.0, 0.0, 2e-8, 0.0]) == 3


class TestConstants:
    def test_published_holder_constant(self):
        assert hard_holder_constant(2, 1.0) == pytest.approx(4 * np.sqrt(2))
        assert hard_holder_constant(2, 0.0) == pytest.approx(2.0)

    def test_provable_bound_dominates(self):
        for p in (2, 3, 4):
            for nu in (0.0, 0.5, 1.0):
                assert hard_holder_bound(p, nu) >= hard_holder_constant(p, nu)
        assert hard_holder_bound(2, 1.0) == pytest.approx(8 * np.sqrt(2))

    def test_lower_bound_constant(self):
        assert lower_bound_constant(2, 1.0) == pytest.approx(36.9504, abs=1e-4)

    def test_envelope_decreases(self):
        values = [lower_bound_envelope(2, 1.0, t, 5.0, 4.0) for t in range(1, 20)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_envelope_rejects_t_zero(self):
        with pytest.raises(ConfigurationError):
            lower_bound_envelope(2, 1.0, 0, 1.0, 1.0)

    def test_invalid_order(self):
        with pytest.raises(ConfigurationError):
            hard_holder_constant(1, 0.5)
