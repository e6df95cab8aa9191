"""
Oráculos suaves embutidos: quadrática, soma de potências e log-sum-exp.
"""

import numpy as np

from apps.core.exceptions import ConfigurationError, SingularDerivativeError, UnsupportedOrderError
from apps.core.vectors import as_vector
from apps.oracle.models import SUPPORTED_ORDERS, HolderHint


def _check_order(order: int) -> int:
    if order not in SUPPORTED_ORDERS:
        raise UnsupportedOrderError(f"Ordem p={order} não suportada (use 2 ou 3).")
    return order


class QuadraticOracle:
    """f(x) = ½xᵀQx − bᵀx com Q simétrica semidefinida positiva."""

    def __init__(self, Q, b, order: int = 2):
        Q = np.array(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ConfigurationError(f"Q deve ser quadrada, recebeu shape {Q.shape}.")
        self.Q = 0.5 * (Q + Q.T)
        self.b = as_vector(b, self.Q.shape[0], name="b")
        self.dim = self.Q.shape[0]
        self.order = _check_order(order)
        # Hessiana constante: qualquer ν serve com H = 0
        self.holder_hint = HolderHint(nu=1.0, constant=0.0)

    def value(self, x):
        return float(0.5 * x @ self.Q @ x - self.b @ x)

    def gradient(self, x):
        return self.Q @ x - self.b

    def hessian_apply(self, x, h):
        return self.Q @ h

    def third_apply(self, x, h):
        return np.zeros(self.dim)

    def minimizer(self):
        return np.linalg.lstsq(self.Q, self.b, rcond=None)[0]


class PowerSumOracle:
    """f(x) = Σ |x_i|^{2+ν}/(2+ν); H_{f,2}(ν) = 1 + ν, mínimo 0 em x = 0."""

    def __init__(self, dim: int, nu: float, order: int = 2):
        if not 0.0 <= nu <= 1.0:
            raise ConfigurationError(f"ν deve estar em [0, 1], recebeu {nu}.")
        self.dim = dim
        self.nu = float(nu)
        self.q = 2.0 + self.nu
        self.order = _check_order(order)
        self.holder_hint = HolderHint(nu=self.nu, constant=1.0 + self.nu) if order == 2 else None

    def value(self, x):
        return float(np.sum(np.abs(x) ** self.q) / self.q)

    def gradient(self, x):
        return np.abs(x) ** (self.q - 1.0) * np.sign(x)

    def hessian_apply(self, x, h):
        return (self.q - 1.0) * np.abs(x) ** self.nu * h

    def third_apply(self, x, h):
        if self.nu < 1.0 and np.any(x == 0.0):
            raise SingularDerivativeError("D³f ilimitada em coordenada nula (ν < 1).")
        with np.errstate(divide="ignore"):
            weight = (self.q - 1.0) * self.nu * np.abs(x) ** (self.nu - 1.0) * np.sign(x)
        return np.where(x == 0.0, 0.0, weight) * h * h


class LogSumExpOracle:
    """f(x) = μ·log Σ_j exp((Ax − b)_j / μ). Sem constante de Hölder informada."""

    def __init__(self, A, b, mu: float = 1.0, order: int = 2):
        A = np.array(A, dtype=np.float64)
        if A.ndim != 2:
            raise ConfigurationError("A deve ser uma matriz.")
        if mu <= 0:
            raise ConfigurationError("μ deve ser positivo.")
        self.A = A
        self.b = as_vector(b, A.shape[0], name="b")
        self.mu = float(mu)
        self.dim = A.shape[1]
        self.order = _check_order(order)
        self.holder_hint = None

    @classmethod
    def random(cls, dim: int, terms: int, seed: int, mu: float = 1.0, order: int = 2):
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal((terms, dim)), rng.standard_normal(terms), mu=mu, order=order)

    def _weights(self, x):
        z = (self.A @ x - self.b) / self.mu
        shift = z.max()
        w = np.exp(z - shift)
        total = w.sum()
        return z, shift, total, w / total

    def value(self, x):
        _, shift, total, _ = self._weights(x)
        return float(self.mu * (shift + np.log(total)))

    def gradient(self, x):
        return self.A.T @ self._weights(x)[3]

    def hessian_apply(self, x, h):
        pi = self._weights(x)[3]
        s = self.A @ h
        return self.A.T @ (pi * (s - pi @ s)) / self.mu

    def third_apply(self, x, h):
        pi = self._weights(x)[3]
        s = self.A @ h
        m1 = pi @ s
        m2 = pi @ (s * s)
        # terceiro momento central em direção à forma D³g[s, s, ·]
        w = pi * (s * s) - 2.0 * m1 * pi * s - m2 * pi + 2.0 * m1 * m1 * pi
        return self.A.T @ w / self.mu**2
