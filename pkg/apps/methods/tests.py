import dataclasses
import math

import numpy as np
import pytest

from apps.core.exceptions import ConfigurationError, LineSearchBlowupError, SubsolverStallError
from apps.hardfn.models import HardInstance
from apps.hardfn.services import HardOracle, hard_holder_bound, hard_holder_constant, hard_optimum, support_size
from apps.methods.models import EstimatingSequence, MethodKind, RunStatus, StoppingRule
from apps.methods.services import (
    a_t_residual,
    accelerated_descent_rhs,
    accelerated_regularization_constant,
    argmin_residual,
    descent_rhs,
    estimating_argmin,
    fixed_regularization_constant,
    run_accelerated,
    run_adaptive_accelerated,
    run_adaptive_tensor,
    run_tensor,
    solve_a_t,
)
from apps.oracle.models import SmoothnessParams
from apps.oracle.services import build_regularized_model
from apps.space.models import MetricSpace
from apps.space.services import dual_norm, primal_norm
from apps.subsolver.models import SubsolverMode, SubsolverOptions
from apps.subsolver.services import check_certificates

H_RIGOROUS = hard_holder_bound(2, 1.0)
H_PRINTED = hard_holder_constant(2, 1.0)
NU1 = SmoothnessParams(nu=1.0)


def f5_stop(f5, eps=1e-6, max_outer_iters=500):
    return StoppingRule(eps=eps, f_star=hard_optimum(f5)[1], max_outer_iters=max_outer_iters)


class CertificateAudit:
    """Callback que reconfere certificados e testes de descida de cada passo aceito."""

    def __init__(self, oracle, space, alpha, opts, accelerated=False):
        self.oracle, self.space, self.alpha, self.opts = oracle, space, alpha, opts
        self.accelerated = accelerated
        self.steps = []
        self.violations = []

    def __call__(self, info):
        if info.est is not None:
            # ψ_t muda a cada passo; guarda a versão vigente
            info = dataclasses.replace(info, est=dataclasses.replace(info.est))
        self.steps.append(info)
        model = build_regularized_model(self.oracle, info.center, info.M, self.alpha, self.space)
        report = check_certificates(model, info.x_next, info.f_center, self.opts)
        if not report.ok:
            self.violations.append(("certificado", info.t))
        trial = info.trial
        if trial.step_norm == 0.0:
            return
        gnorm = dual_norm(self.space, trial.f_gradient)
        if self.accelerated:
            lhs = float(np.dot(trial.f_gradient, info.center - trial.point))
            ok = lhs >= accelerated_descent_rhs(gnorm, info.M, 2, self.alpha)
        else:
            ok = info.f_prev - trial.f_value >= descent_rhs(gnorm, info.M, 2, self.alpha)
        if not ok:
            self.violations.append(("descida", info.t))


def assert_oracle_identity(record):
    """O_T = 2T + log₂(H_T/H_0) em toda linha."""
    for row in record.rows:
        ratio = math.log2(row.H / record.H0)
        assert ratio == int(ratio)
        assert row.oracle_calls == 2 * row.t + int(ratio)


class TestConstants:
    def test_fixed_regularization_constant(self):
        assert fixed_regularization_constant(1.0, 2.0, 0.1, 2) == pytest.approx(3.0)
        assert fixed_regularization_constant(1.0, 0.0, 0.5, 3) == pytest.approx(3.0)

    def test_zero_constants_rejected(self):
        with pytest.raises(ConfigurationError):
            fixed_regularization_constant(1.0, 0.0, 0.0, 2)
        with pytest.raises(ConfigurationError):
            accelerated_regularization_constant(1.0, 0.0, 0.0, 2)

    def test_accelerated_threshold(self):
        assert accelerated_regularization_constant(1.0, 2.0, 0.1, 2) == pytest.approx(2 * 2.1)

    def test_descent_rhs(self):
        """p=2, α=1: ‖g‖^{3/2}/(8·3!·M^{1/2})."""
        assert descent_rhs(4.0, 4.0, 2, 1.0) == pytest.approx(8.0 / (48.0 * 2.0))
        assert accelerated_descent_rhs(4.0, 4.0, 2, 1.0) == pytest.approx(0.25 * 0.5 * 8.0)


class TestSolveAt:
    def test_zero_accumulated_weight(self):
        """A = 0: a = c = (p−1)!/(2^{3p−1}M)."""
        assert solve_a_t(0.0, 2.0, 2, 1.0) == pytest.approx(1.0 / 64.0)

    def test_cubic_case_against_polynomial_root(self):
        """p=2, α=1, c=1, A=1: a³ = (1+a)², raiz de a³ − a² − 2a − 1."""
        M = 1.0 / 32.0
        a = solve_a_t(1.0, M, 2, 1.0)
        roots = np.roots([1.0, -1.0, -2.0, -1.0])
        expected = max(r.real for r in roots if abs(r.imag) < 1e-12)
        assert a == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("A", [1e-8, 0.3, 5.0, 1e4, 1e8])
    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
    def test_residual(self, A, alpha):
        for p in (2, 3):
            a = solve_a_t(A, 7.5, p, alpha)
            assert a > 0
            assert a_t_residual(a, A, 7.5, p, alpha) <= 1e-12

    def test_invalid_input(self):
        with pytest.raises(ConfigurationError):
            solve_a_t(-1.0, 1.0, 2, 1.0)


class TestEstimatingSequence:
    def test_argmin_without_linear_part(self):
        est = EstimatingSequence.start(np.array([1.0, 2.0]), 3.0)
        np.testing.assert_array_equal(estimating_argmin(est, MetricSpace.identity(2)), [1.0, 2.0])

    def test_argmin_is_stationary(self, rng):
        space = MetricSpace.diagonal([1.0, 4.0, 0.5])
        for power in (2.0, 2.5, 3.0, 4.0):
            est = EstimatingSequence.start(rng.standard_normal(3), power)
            for _ in range(4):
                est.absorb(rng.uniform(0.1, 2.0), rng.normal(), rng.standard_normal(3), rng.standard_normal(3))
            v = estimating_argmin(est, space)
            assert argmin_residual(est, space, v) <= 1e-9
            for _ in range(20):
                z = v + 0.1 * rng.standard_normal(3)
                best = est.value(space, v)
                assert best <= est.value(space, z) + 1e-12 * max(1.0, abs(best))


class TestStoppingRule:
    def test_requires_a_criterion(self):
        with pytest.raises(ConfigurationError):
            StoppingRule(eps=1e-6)
        StoppingRule(gtol=1e-8)
        StoppingRule(eps=1e-6, f_star=0.0)

    @pytest.mark.parametrize("eps", [0.0, 1.0, 2.5])
    def test_eps_outside_unit_interval(self, eps):
        with pytest.raises(ConfigurationError):
            StoppingRule(eps=eps, f_star=0.0)

    def test_reached(self):
        rule = StoppingRule(eps=1e-3, f_star=-1.0)
        assert rule.reached(-0.9995, 10.0)
        assert not rule.reached(-0.9, 10.0)


class TestBasicMethods:
    def test_tensor_certificates(self, f5, f5_oracle, space11, sub_opts):
        M = fixed_regularization_constant(1.0, H_RIGOROUS, sub_opts.theta, 2)
        audit = CertificateAudit(f5_oracle, space11, 1.0, sub_opts)
        record = run_tensor(f5_oracle, NU1, M, f5_stop(f5), sub_opts, callback=audit)
        assert record.status == RunStatus.CONVERGED
        assert audit.steps and not audit.violations
        assert record.rows[0].t == 0 and record.rows[-1].residual <= 1e-6
        assert all(b.f <= a.f + 1e-12 for a, b in zip(record.rows, record.rows[1:]))

    def test_adaptive_tensor_certificates_and_accounting(self, f5, f5_oracle, space11, sub_opts):
        audit = CertificateAudit(f5_oracle, space11, 1.0, sub_opts)
        record = run_adaptive_tensor(f5_oracle, NU1, 1.0, f5_stop(f5), sub_opts, callback=audit)
        assert record.converged
        assert not audit.violations
        assert_oracle_identity(record)
        cap = 2 * fixed_regularization_constant(1.0, H_RIGOROUS, sub_opts.theta, 2)
        assert all(info.M <= cap for info in audit.steps)
        # teto com a constante publicada: 2·(3/2)·4√2 ≈ 16.97
        printed_cap = 2 * fixed_regularization_constant(1.0, H_PRINTED, sub_opts.theta, 2)
        assert printed_cap == pytest.approx(16.97, abs=5e-3)
        assert all(info.M <= printed_cap for info in audit.steps)

    def test_large_initial_constant_halves(self, f5, f5_oracle, sub_opts):
        """H0 grande: passos aceitos de primeira e H_t cai pela metade."""
        threshold = fixed_regularization_constant(1.0, H_RIGOROUS, sub_opts.theta, 2)
        record = run_adaptive_tensor(f5_oracle, NU1, 1e6, f5_stop(f5, max_outer_iters=40), sub_opts)
        assert_oracle_identity(record)
        for prev, row in zip(record.rows, record.rows[1:]):
            if prev.H < 2 * threshold:
                break
            assert row.H == prev.H / 2
            assert row.ls_trials == 0

    def test_descent_failure_with_small_constant(self, f5, f5_oracle, sub_opts):
        record = run_tensor(f5_oracle, NU1, 1e-3, f5_stop(f5), sub_opts)
        assert record.status == RunStatus.DESCENT_FAILURE
        assert record.status.failed
        assert "adaptativo" in record.message

    def test_line_search_cap(self, f5, f5_oracle, sub_opts):
        with pytest.raises(LineSearchBlowupError) as exc_info:
            run_adaptive_tensor(f5_oracle, NU1, 1e-3, f5_stop(f5), sub_opts, max_doublings=0)
        assert exc_info.value.record.status == RunStatus.LINE_SEARCH_BLOWUP

    def test_fixed_method_propagates_stall(self, f5, f5_oracle):
        opts = SubsolverOptions(theta=0.0, max_inner_iters=1, mode=SubsolverMode.FIRST_ORDER)
        with pytest.raises(SubsolverStallError) as exc_info:
            run_tensor(f5_oracle, NU1, 20.0, f5_stop(f5), opts)
        assert exc_info.value.record.status == RunStatus.SUBSOLVER_STALL

    def test_adaptive_treats_stall_as_failed_trial(self, f5, f5_oracle):
        """Todas as tentativas travam: estoura o teto de duplicações."""
        opts = SubsolverOptions(theta=0.0, max_inner_iters=1, mode=SubsolverMode.FIRST_ORDER)
        with pytest.raises(LineSearchBlowupError):
            run_adaptive_tensor(f5_oracle, NU1, 1.0, f5_stop(f5), opts, max_doublings=3)

    def test_zero_iterations(self, f5, f5_oracle, sub_opts):
        record = run_tensor(f5_oracle, NU1, 20.0, f5_stop(f5, max_outer_iters=0), sub_opts)
        assert record.status == RunStatus.MAX_ITERS
        assert len(record.rows) == 1 and record.oracle_calls == 0

    def test_start_at_optimum(self, f5, f5_oracle, sub_opts):
        x_star, _ = hard_optimum(f5)
        record = run_adaptive_tensor(f5_oracle, NU1, 1.0, f5_stop(f5), sub_opts, x0=x_star)
        assert record.converged and record.iterations == 0


class TestAcceleratedMethods:
    def _audit_sequence(self, audit, oracle, space, power, rng):
        absorbed = []
        for info in audit.steps:
            assert 0.0 < info.gamma <= 1.0
            assert info.a_residual <= 1e-12
            assert info.argmin_residual <= 1e-9
            est = info.est
            absorbed.append((info.a, info.trial.f_value, info.trial.f_gradient, info.trial.point))
            # forma linear acumulada = soma direta das linearizações ponderadas
            for _ in range(5):
                x = info.x_next + rng.standard_normal(oracle.dim)
                direct = sum(a * (fv + float(np.dot(g, x - pt))) for a, fv, g, pt in absorbed)
                direct += primal_norm(space, x - est.x0) ** power / power
                assert est.value(space, x) == pytest.approx(direct, rel=1e-10, abs=1e-10)
            # ψ_t(x) ≤ A_t f(x) + ‖x − x0‖^q/q
            for _ in range(100):
                x = info.x_next + rng.standard_normal(oracle.dim) * rng.uniform(0.1, 3.0)
                bound = est.A * oracle.value(x) + np.linalg.norm(x - est.x0) ** power / power
                assert est.value(space, x) <= bound + 1e-9 * max(1.0, abs(bound))
            # A_t f(x_t) ≤ ψ_t(v_t)
            lhs = est.A * info.trial.f_value
            rhs = est.value(space, info.v_next)
            assert lhs <= rhs + 1e-9 * max(1.0, abs(rhs))

    def test_accelerated_certificates(self, f5, f5_oracle, space11, sub_opts, rng):
        M = accelerated_regularization_constant(1.0, H_RIGOROUS, sub_opts.theta, 2)
        audit = CertificateAudit(f5_oracle, space11, 1.0, sub_opts, accelerated=True)
        record = run_accelerated(f5_oracle, NU1, M, f5_stop(f5), sub_opts, callback=audit)
        assert record.converged
        assert not audit.violations
        self._audit_sequence(audit, f5_oracle, space11, 3.0, rng)
        assert audit.steps[0].gamma == 1.0

    def test_adaptive_accelerated(self, f5, f5_oracle, space11, sub_opts, rng):
        audit = CertificateAudit(f5_oracle, space11, 1.0, sub_opts, accelerated=True)
        record = run_adaptive_accelerated(f5_oracle, NU1, 1.0, f5_stop(f5), sub_opts, callback=audit)
        assert record.converged
        assert not audit.violations
        assert_oracle_identity(record)
        cap = 2 * accelerated_regularization_constant(1.0, H_RIGOROUS, sub_opts.theta, 2)
        assert all(info.M <= cap for info in audit.steps)
        # 2(p+ν−1)(H_f + θ) com a constante publicada
        printed_cap = 2 * accelerated_regularization_constant(1.0, H_PRINTED, sub_opts.theta, 2)
        assert printed_cap == pytest.approx(2 * 2 * (H_PRINTED + sub_opts.theta))
        assert all(info.M <= printed_cap for info in audit.steps)
        self._audit_sequence(audit, f5_oracle, space11, 3.0, rng)

    def test_best_residual_is_monotone(self, f5, f5_oracle, sub_opts):
        record = run_adaptive_accelerated(f5_oracle, NU1, 1.0, f5_stop(f5), sub_opts)
        best = record.best_residuals()
        assert all(b <= a for a, b in zip(best, best[1:]))


class TestUniversal:
    @pytest.mark.parametrize("runner", [run_adaptive_tensor, run_adaptive_accelerated])
    def test_unknown_nu(self, runner, sub_opts):
        """α = 1 sem conhecer ν = 0.5: converge em f_4 até ε = 1e-4."""
        inst = HardInstance(n=8, k=4, p=2, nu=0.5)
        oracle = HardOracle(inst)
        space = MetricSpace.identity(8)
        params = SmoothnessParams.universal(nu=0.5)
        audit = CertificateAudit(oracle, space, 1.0, sub_opts, accelerated=runner is run_adaptive_accelerated)
        stop = StoppingRule(eps=1e-4, f_star=hard_optimum(inst)[1], max_outer_iters=1000)
        record = runner(oracle, params, 1.0, stop, sub_opts, callback=audit)
        assert record.converged
        assert record.alpha == 1.0
        assert not audit.violations


class TestSupportGrowth:
    @pytest.mark.parametrize(
        "runner,per_step",
        [(run_adaptive_tensor, 2), (run_adaptive_accelerated, 4)],
    )
    def test_support_grows_linearly(self, runner, per_step, sub_opts):
        """Em f_T a partir de 0 o suporte cresce no máximo per_step índices por iteração."""
        inst = HardInstance(n=30, k=30, p=2, nu=1.0)
        oracle = HardOracle(inst)
        seen = []
        runner(
            oracle,
            NU1,
            1.0,
            StoppingRule(gtol=0.0, max_outer_iters=6),
            sub_opts,
            callback=lambda info: seen.append((info.t + 1, support_size(info.x_next))),
        )
        assert seen
        for t, size in seen:
            assert size <= per_step * t


class TestMethodKind:
    def test_flags(self):
        assert MethodKind.ADAPTIVE_TENSOR.adaptive and not MethodKind.ADAPTIVE_TENSOR.accelerated
        assert MethodKind.ACCELERATED.accelerated and not MethodKind.ACCELERATED.adaptive
        assert RunStatus.CONVERGED.label == "Convergiu"
