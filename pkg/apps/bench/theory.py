"""
Constantes e limitantes teóricos calculáveis.

Tudo aqui é fórmula fechada sobre (p, ν, θ, H_f) e, quando exigido, sobre os
substitutos D0 e R(ε) informados pelo usuário. Saídas que dependem de um
substituto ausente são None.
"""

import math
from dataclasses import dataclass

from apps.core.exceptions import ConfigurationError
from apps.methods.services import accelerated_regularization_constant, fixed_regularization_constant


@dataclass(frozen=True)
class TheoryConstants:
    p: int
    nu: float
    theta: float
    H_f: float
    nu_known: bool = True
    D0: float | None = None
    R: float | None = None

    def __post_init__(self):
        if self.p < 2:
            raise ConfigurationError(f"p deve ser ≥ 2, recebeu {self.p}.")
        if not 0.0 <= self.nu <= 1.0:
            raise ConfigurationError(f"ν deve estar em [0, 1], recebeu {self.nu}.")
        if self.theta < 0 or self.H_f < 0:
            raise ConfigurationError("θ e H_f devem ser não negativos.")

    # ------------------------------------------------------------------
    # Expoentes
    # ------------------------------------------------------------------
    @property
    def alpha(self) -> float:
        return self.nu if self.nu_known else 1.0

    @property
    def q(self) -> float:
        """p + α: expoente do regularizador."""
        return self.p + self.alpha

    @property
    def q_nu(self) -> float:
        return self.p + self.nu

    @property
    def _fact(self) -> float:
        return float(math.factorial(self.p - 1))

    # ------------------------------------------------------------------
    # Limiares
    # ------------------------------------------------------------------
    @property
    def fixed_threshold(self) -> float:
        """M_ν = max{3H_f/2, 3θ(p−1)!}."""
        return fixed_regularization_constant(self.nu, self.H_f, self.theta, self.p)

    @property
    def accelerated_threshold(self) -> float:
        """(p+ν−1)(H_f + θ(p−1)!)."""
        return accelerated_regularization_constant(self.nu, self.H_f, self.theta, self.p)

    def _universal_factor(self, H: float, ratio: float) -> float:
        expo = self.q_nu - 1.0
        return H ** (self.p / expo) * ratio ** ((1.0 - self.nu) / expo)

    def N(self, eps: float | None = None) -> float | None:
        """
        N_ν(ε): max{1.5H_f, 3θ(p−1)!} quando α = ν; com α = 1,
        max{θ, (1.5H_f)^{p/(p+ν−1)}(4R(ε)/ε)^{(1−ν)/(p+ν−1)}}.
        """
        if self.nu_known:
            return max(1.5 * self.H_f, 3.0 * self.theta * self._fact)
        if eps is None or self.R is None:
            return None
        return max(self.theta, self._universal_factor(1.5 * self.H_f, 4.0 * self.R / eps))

    def N_tilde(self, eps: float | None = None) -> float | None:
        """Análogo de N_ν(ε) para os acelerados."""
        if self.nu_known:
            return (self.q_nu - 1.0) * (self.H_f + self.theta * self._fact)
        if eps is None or self.R is None:
            return None
        return max(4.0 * self.theta * self._fact, self._universal_factor(4.0 * self.H_f, 4.0 * self.R / eps))

    def xi(self, delta: float) -> float:
        """ξ_ν(δ) = max{θ, (1.5H_f)^{p/(p+ν−1)}(4/δ)^{(1−ν)/(p+ν−1)}}."""
        if delta <= 0:
            raise ConfigurationError("δ deve ser positivo.")
        return max(self.theta, self._universal_factor(1.5 * self.H_f, 4.0 / delta))

    # ------------------------------------------------------------------
    # Envelopes superiores (resíduo f(x_t) − f*)
    # ------------------------------------------------------------------
    def _basic_upper(self, t: int, constant: float, m: int) -> float | None:
        if self.D0 is None or t <= m:
            return None
        q = self.q
        factor = 24.0 * self.p * math.factorial(self.p + 1)
        return factor ** (q - 1.0) * constant * self.D0**q / (t - m) ** (q - 1.0)

    def tensor_upper(self, t: int, M: float, m: int = 0) -> float | None:
        """[24p(p+1)!]^{q−1}·M·D0^q/(t−m)^{q−1}."""
        return self._basic_upper(t, M, m)

    def adaptive_tensor_upper(self, t: int, H0: float, eps: float | None = None, m: int = 0) -> float | None:
        """Mesmo envelope com 2max{H0, N_ν(ε)} no lugar de M."""
        N = self.N(eps)
        if N is None:
            return None
        return self._basic_upper(t, 2.0 * max(H0, N), m)

    def _accelerated_upper(self, t: int, constant: float, x0_dist: float | None) -> float | None:
        if x0_dist is None or t < 2:
            return None
        q = self.q
        return constant * q ** (q - 1.0) * x0_dist**q / (self._fact * (t - 1.0) ** q)

    def accelerated_upper(self, t: int, M: float, x0_dist: float | None) -> float | None:
        """2^{3p−1}M q^{q−1}‖x0 − x*‖^q / ((p−1)!(t−1)^q), t ≥ 2."""
        return self._accelerated_upper(t, 2.0 ** (3 * self.p - 1) * M, x0_dist)

    def adaptive_accelerated_upper(
        self, t: int, H0: float, x0_dist: float | None, eps: float | None = None
    ) -> float | None:
        """2^{3p}max{Ñ, H0}·q^{q−1}‖x0 − x*‖^q / ((p−1)!(t−1)^q), t ≥ 2."""
        Nt = self.N_tilde(eps)
        if Nt is None:
            return None
        return self._accelerated_upper(t, 2.0 ** (3 * self.p) * max(Nt, H0), x0_dist)

    # ------------------------------------------------------------------
    # Complexidade
    # ------------------------------------------------------------------
    def transient_bound(self, H0: float, f_gap: float, eps: float | None = None) -> float | None:
        """
        Fase transitória dos métodos básicos:
        m ≤ ln max{1, log₂((f0 − f*)/([8(p+1)!]^{q−1}·2max{H0,N}·D0^q))} / ln(q/(q−1)).
        """
        N = self.N(eps)
        if N is None or self.D0 is None:
            return None
        q = self.q
        denom = (8.0 * math.factorial(self.p + 1)) ** (q - 1.0) * 2.0 * max(H0, N) * self.D0**q
        inner = math.log2(f_gap / denom) if f_gap > 0 else 0.0
        return math.log(max(1.0, inner)) / math.log(q / (q - 1.0))

    def adaptive_tensor_iterations(self, eps: float, H0: float, m: float = 0.0) -> float | None:
        """T ≤ m + 24p(p+1)!·(2max{H0,N}D0^q)^{1/(q−1)}·ε^{−1/(q−1)}."""
        N = self.N(eps)
        if N is None or self.D0 is None:
            return None
        q = self.q
        kappa = (2.0 * max(H0, N) * self.D0**q) ** (1.0 / (q - 1.0))
        return m + 24.0 * self.p * math.factorial(self.p + 1) * kappa * eps ** (-1.0 / (q - 1.0))

    def adaptive_accelerated_iterations(self, eps: float, H0: float, x0_dist: float) -> float | None:
        """T ≤ 1 + [2^{3p}max{H0,Ñ}q^{q−1}‖x0 − x*‖^q/(ε(p−1)!)]^{1/q}."""
        Nt = self.N_tilde(eps)
        if Nt is None:
            return None
        q = self.q
        inner = 2.0 ** (3 * self.p) * max(H0, Nt) * q ** (q - 1.0) * x0_dist**q / (eps * self._fact)
        return 1.0 + inner ** (1.0 / q)

    def oracle_call_bound(self, T: int, H0: float, eps: float | None = None, accelerated: bool = False) -> float | None:
        """O_T ≤ 2T + log₂max{H0, N} − log₂H0."""
        N = self.N_tilde(eps) if accelerated else self.N(eps)
        if N is None:
            return None
        return 2.0 * T + math.log2(max(H0, N)) - math.log2(H0)

    def a_growth_lower(self, t: int, M: float) -> float:
        """A_t ≥ (1/M̃)[(1/q)(½)^{(q−1)/q}]^q (t−1)^q com M̃ = 2^{3p−1}M/(p−1)!."""
        q = self.q
        M_tilde = 2.0 ** (3 * self.p - 1) * M / self._fact
        return ((1.0 / q) * 0.5 ** ((q - 1.0) / q)) ** q * max(t - 1.0, 0.0) ** q / M_tilde

    def near_optimality(self, eps: float) -> dict[str, float | bool]:
        """
        Razão entre a complexidade acelerada ε^{−1/(p+ν)} e a inferior
        ε^{−2/(3(p+ν)−2)}; nunca passa de (1/ε)^{1/8}.
        """
        q = self.q_nu
        upper = eps ** (-1.0 / q)
        lower = eps ** (-2.0 / (3.0 * q - 2.0))
        ratio = upper / lower
        ceiling = (1.0 / eps) ** 0.125
        return {
            "eps": eps,
            "upper_complexity": upper,
            "lower_complexity": lower,
            "ratio": ratio,
            "ceiling": ceiling,
            "within_ceiling": ratio <= ceiling,
            "within_factor_6": upper <= 6.0 * lower,
        }

    def as_dict(self, eps: float | None = None, delta: float | None = None) -> dict:
        data = {
            "p": self.p,
            "nu": self.nu,
            "alpha": self.alpha,
            "theta": self.theta,
            "H_f": self.H_f,
            "fixed_threshold": self.fixed_threshold if (self.H_f or self.theta) else None,
            "accelerated_threshold": self.accelerated_threshold if (self.H_f or self.theta) else None,
            "N": self.N(eps),
            "N_tilde": self.N_tilde(eps),
        }
        if delta is not None:
            data["xi"] = self.xi(delta)
        if eps is not None:
            data["near_optimality"] = self.near_optimality(eps)
        return data
