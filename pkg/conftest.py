import numpy as np
import pytest

from apps.hardfn.models import HardInstance
from apps.hardfn.services import HardOracle
from apps.space.models import MetricSpace
from apps.subsolver.models import SubsolverOptions


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def f5():
    """f_5 em ℝ¹¹ com p=2, ν=1 (instância padrão dos testes de métodos)."""
    return HardInstance(n=11, k=5, p=2, nu=1.0)


@pytest.fixture
def f5_oracle(f5):
    return HardOracle(f5)


@pytest.fixture
def space11():
    return MetricSpace.identity(11)


@pytest.fixture
def sub_opts():
    return SubsolverOptions(theta=0.1)


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    """Redireciona OUTPUT_ROOT para um diretório temporário."""
    from config import settings

    monkeypatch.setattr(settings, "OUTPUT_ROOT", tmp_path)
    return tmp_path
