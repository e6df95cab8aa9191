import numpy as np
import pytest

from apps.core.exceptions import ConfigurationError, DimensionMismatchError
from apps.space.models import MetricKind, MetricSpace
from apps.space.services import dual_norm, pairing, primal_norm


class TestNorms:
    def test_identity_norm(self):
        """Com B = I a norma primal é a euclidiana."""
        space = MetricSpace.identity(2)
        assert primal_norm(space, [3.0, 4.0]) == pytest.approx(5.0)
        assert dual_norm(space, [3.0, 4.0]) == pytest.approx(5.0)
        assert primal_norm(space, [0.0, 0.0]) == 0.0

    def test_diagonal_norms(self):
        space = MetricSpace.diagonal([4.0, 1.0])
        assert primal_norm(space, [1.0, 0.0]) == pytest.approx(2.0)
        assert dual_norm(space, [2.0, 0.0]) == pytest.approx(1.0)

    def test_dense_dual_norm_matches_explicit_inverse(self, rng):
        """‖s‖* confere com ⟨s, B⁻¹s⟩^{1/2} calculado pela inversa explícita."""
        A = rng.standard_normal((6, 6))
        B = A @ A.T + 6 * np.eye(6)
        space = MetricSpace.dense(B)
        assert space.kind == MetricKind.DENSE
        s = rng.standard_normal(6)
        expected = np.sqrt(s @ np.linalg.inv(B) @ s)
        assert dual_norm(space, s) == pytest.approx(expected, rel=1e-12)

    def test_cauchy_schwarz(self, rng):
        """|⟨s, x⟩| ≤ ‖s‖*‖x‖ em 1000 pares aleatórios."""
        A = rng.standard_normal((4, 4))
        space = MetricSpace.dense(A @ A.T + np.eye(4))
        for _ in range(1000):
            s, x = rng.standard_normal(4), rng.standard_normal(4)
            assert abs(pairing(s, x)) <= dual_norm(space, s) * primal_norm(space, x) * (1 + 1e-12)

    def test_triangle_and_homogeneity(self, rng):
        space = MetricSpace.diagonal([1.0, 2.0, 3.0])
        for _ in range(200):
            x, y = rng.standard_normal(3), rng.standard_normal(3)
            c = rng.normal()
            assert primal_norm(space, x + y) <= primal_norm(space, x) + primal_norm(space, y) + 1e-12
            assert primal_norm(space, c * x) == pytest.approx(abs(c) * primal_norm(space, x))


class TestPairing:
    def test_pairing_values(self):
        assert pairing([1.0, 2.0], [3.0, 4.0]) == 11.0
        assert pairing([0.0, 0.0], [5.0, -1.0]) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            pairing([1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(DimensionMismatchError):
            primal_norm(MetricSpace.identity(3), [1.0, 2.0])


class TestMetricConstruction:
    def test_rejects_non_positive_diagonal(self):
        with pytest.raises(ConfigurationError):
            MetricSpace.diagonal([1.0, 0.0])

    def test_rejects_indefinite_dense(self):
        """Cholesky falha para matriz indefinida."""
        with pytest.raises(ConfigurationError):
            MetricSpace.dense([[1.0, 2.0], [2.0, 1.0]])

    def test_rejects_asymmetric_dense(self):
        with pytest.raises(ConfigurationError):
            MetricSpace.dense([[2.0, 1.0], [0.0, 2.0]])

    def test_apply_solve_inverse(self, rng):
        A = rng.standard_normal((5, 5))
        space = MetricSpace.dense(A @ A.T + np.eye(5))
        x = rng.standard_normal(5)
        np.testing.assert_allclose(space.solve(space.apply(x)), x, rtol=1e-10, atol=1e-12)
