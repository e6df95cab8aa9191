"""
Services do app hardfn: f_k, derivativas, ótimo, constantes de Hölder e o
envelope inferior de complexidade.
"""

import math

import numpy as np

from apps.core.exceptions import ConfigurationError, SingularDerivativeError, UnsupportedOrderError
from apps.core.vectors import DualVector, Vector, as_vector
from apps.hardfn.models import HardForm, HardInstance
from apps.oracle.models import SUPPORTED_ORDERS, HolderHint

# ==============================================================================
# AVALIAÇÃO
# ==============================================================================


def hard_value(inst: HardInstance, x: Vector, form: HardForm = HardForm.FACTORED) -> float:
    x = as_vector(x, inst.n)
    q = inst.q
    if form == HardForm.EXPLICIT:
        diffs = x[: inst.k - 1] - x[1 : inst.k]
        tail = x[inst.k - 1 :]
        return float((np.sum(np.abs(diffs) ** q) + np.sum(np.abs(tail) ** q)) / q - x[0])
    u = inst.operator.apply(x)
    return float(np.sum(np.abs(u) ** q) / q - x[0])


def hard_gradient(inst: HardInstance, x: Vector) -> DualVector:
    """∇f_k = A_kᵀ∇η(A_k x) − e_1 com ∇η(u)_i = |u_i|^{q−1}sign(u_i)."""
    x = as_vector(x, inst.n)
    A = inst.operator
    u = A.apply(x)
    g = A.apply_transpose(np.abs(u) ** (inst.q - 1.0) * np.sign(u))
    g[0] -= 1.0
    return g


def hard_hessian_apply(inst: HardInstance, x: Vector, h: Vector) -> DualVector:
    """A_kᵀ((q−1)|u|^{q−2} ⊙ A_k h); em u_i = 0 usa o limite contínuo."""
    x = as_vector(x, inst.n)
    h = as_vector(h, inst.n, name="h")
    A = inst.operator
    u = A.apply(x)
    # 0.0**0.0 == 1.0 cobre q = 2
    weight = (inst.q - 1.0) * np.abs(u) ** (inst.q - 2.0)
    return A.apply_transpose(weight * A.apply(h))


def hard_third_apply(inst: HardInstance, x: Vector, h: Vector) -> DualVector:
    """A_kᵀ((q−1)(q−2)|u|^{q−3}sign(u) ⊙ (A_k h)²)."""
    x = as_vector(x, inst.n)
    h = as_vector(h, inst.n, name="h")
    A = inst.operator
    u = A.apply(x)
    q = inst.q
    if q == 2.0:
        return np.zeros(inst.n)
    if q < 3.0 and np.any(u == 0.0):
        raise SingularDerivativeError(
            f"D³f_k ilimitada: coordenada nula de A_k x com p+ν={q:g} < 3."
        )
    with np.errstate(divide="ignore"):
        weight = (q - 1.0) * (q - 2.0) * np.abs(u) ** (q - 3.0) * np.sign(u)
    weight = np.where(u == 0.0, 0.0, weight)
    return A.apply_transpose(weight * A.apply(h) ** 2)


def hard_optimum(inst: HardInstance) -> tuple[np.ndarray, float]:
    """x*_i = (k − i + 1)_+ e f* = −(p+ν−1)k/(p+ν)."""
    i = np.arange(1, inst.n + 1, dtype=np.float64)
    x_star = np.maximum(inst.k - i + 1.0, 0.0)
    return x_star, -(inst.q - 1.0) * inst.k / inst.q


def support_size(x: Vector, tol: float = 1e-8) -> int:
    """Maior índice (1-based) com |x_i| > tol; 0 para o vetor nulo."""
    idx = np.flatnonzero(np.abs(np.asarray(x, dtype=np.float64)) > tol)
    return int(idx[-1]) + 1 if idx.size else 0


# ==============================================================================
# CONSTANTES
# ==============================================================================


def _falling_product(p: int, nu: float, start: int) -> float:
    return math.prod(p + nu - i for i in range(start, p))


def hard_holder_constant(p: int, nu: float) -> float:
    """Valor publicado 2^{(2+ν)/2}·Π_{i=1}^{p−1}(p+ν−i); define o envelope inferior."""
    _check(p, nu)
    return 2.0 ** ((2.0 + nu) / 2.0) * _falling_product(p, nu, 1)


def hard_holder_bound(p: int, nu: float) -> float:
    """
    Limitante demonstrável de H_{f_k,p}(ν) a partir de ‖A_k‖ ≤ 2 e da norma √2
    das linhas de A_k. Para k ≥ 3 o valor publicado não é limitante superior
    (x = (0, 1, −1, 0, …), y = 0 dá quociente 10/√2 com p=2, ν=1).
    """
    _check(p, nu)
    odd = 2.0 ** (1.0 - nu) if p % 2 else 1.0
    return 2.0 ** (p + nu / 2.0) * _falling_product(p, nu, 1) * odd


def lower_bound_constant(p: int, nu: float) -> float:
    """C_{p,ν} = 2^{(3p+4ν+2)/2}Π_{i=0}^{p−1}(p+ν−i) / (3^{(p+ν)/2}(p+ν−1))."""
    _check(p, nu)
    q = p + nu
    return 2.0 ** ((3 * p + 4 * nu + 2) / 2.0) * _falling_product(p, nu, 0) / (3.0 ** (q / 2.0) * (q - 1.0))


def lower_bound_envelope(p: int, nu: float, t: int, x0_dist: float, H_f: float) -> float:
    """H_f‖x0 − x*‖^{p+ν} / (C_{p,ν}(t+1)^{(3(p+ν)−2)/2}); vale quando 2t+1 = k ≤ n."""
    if t < 1:
        raise ConfigurationError(f"t deve ser ≥ 1, recebeu {t}.")
    q = p + nu
    return H_f * x0_dist**q / (lower_bound_constant(p, nu) * (t + 1.0) ** ((3.0 * q - 2.0) / 2.0))


def _check(p: int, nu: float) -> None:
    if p < 2:
        raise ConfigurationError(f"p deve ser ≥ 2, recebeu {p}.")
    if not 0.0 <= nu <= 1.0:
        raise ConfigurationError(f"ν deve estar em [0, 1], recebeu {nu}.")


# ==============================================================================
# ADAPTADOR DE ORÁCULO
# ==============================================================================


class HardOracle:
    """f_k como DerivativeOracle de ordem inst.p, com dica (ν, limitante rigoroso)."""

    def __init__(self, inst: HardInstance):
        if inst.p not in SUPPORTED_ORDERS:
            raise UnsupportedOrderError(f"Ordem p={inst.p} não suportada pelos métodos (use 2 ou 3).")
        self.inst = inst
        self.dim = inst.n
        self.order = inst.p
        self.holder_hint = HolderHint(nu=inst.nu, constant=hard_holder_bound(inst.p, inst.nu))

    def value(self, x):
        return hard_value(self.inst, x)

    def gradient(self, x):
        return hard_gradient(self.inst, x)

    def hessian_apply(self, x, h):
        return hard_hessian_apply(self.inst, x, h)

    def third_apply(self, x, h):
        return hard_third_apply(self.inst, x, h)

    def optimum(self) -> tuple[np.ndarray, float]:
        return hard_optimum(self.inst)
