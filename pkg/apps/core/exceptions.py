"""
Exceções compartilhadas - HolderTensor.

Toda falha da biblioteca herda de HolderTensorError; a bancada converte essas
exceções em status de execução e códigos de saída.
"""


class HolderTensorError(Exception):
    """Raiz da hierarquia de erros do projeto."""


class DimensionMismatchError(HolderTensorError, ValueError):
    """Vetores ou operadores com dimensões incompatíveis."""


class ConfigurationError(HolderTensorError, ValueError):
    """Parâmetros inválidos (constantes, tolerâncias, ordens)."""


class NumericalError(HolderTensorError, ArithmeticError):
    """Valor não finito ou invariante numérico violado."""


class SingularDerivativeError(NumericalError):
    """Derivada ilimitada pedida num ponto de não-diferenciabilidade."""


class UnsupportedOrderError(HolderTensorError, NotImplementedError):
    """Ordem p fora do suporte da operação."""


class SubsolverStallError(HolderTensorError):
    """Subproblema atingiu o teto de iterações internas."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        # Melhor TrialPoint encontrado até o travamento (pode ser None)
        self.best = best


class LineSearchBlowupError(HolderTensorError):
    """Busca adaptativa excedeu o teto de duplicações de H."""

    def __init__(self, message: str, doublings: int):
        super().__init__(message)
        self.doublings = doublings
