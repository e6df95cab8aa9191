import logging

import numpy as np
import pytest

from apps.core.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    HolderTensorError,
    NumericalError,
    SingularDerivativeError,
    SubsolverStallError,
)
from apps.core.logs import configure_logging
from apps.core.vectors import as_vector, check_same_dim


class TestVectors:
    def test_scalar_becomes_vector(self):
        np.testing.assert_array_equal(as_vector(2.0), [2.0])

    def test_dimension_checked(self):
        with pytest.raises(DimensionMismatchError):
            as_vector([1.0, 2.0], dim=3)
        with pytest.raises(DimensionMismatchError):
            as_vector(np.ones((2, 2)))
        with pytest.raises(DimensionMismatchError):
            check_same_dim(np.ones(2), np.ones(3))

    def test_rejects_non_finite(self):
        with pytest.raises(NumericalError):
            as_vector([1.0, np.nan])


class TestExceptions:
    def test_hierarchy(self):
        """Erros de configuração também são ValueError; derivada singular é numérica."""
        assert issubclass(ConfigurationError, ValueError)
        assert issubclass(SingularDerivativeError, NumericalError)
        assert issubclass(SubsolverStallError, HolderTensorError)

    def test_stall_carries_best(self):
        exc = SubsolverStallError("travou", best="melhor")
        assert exc.best == "melhor"


class TestLogging:
    def test_apps_logger_level_from_settings(self, monkeypatch):
        from config import settings

        monkeypatch.setitem(settings.LOGGING["loggers"]["apps"], "level", "ERROR")
        configure_logging(force=True)
        assert logging.getLogger("apps").level == logging.ERROR
        monkeypatch.undo()
        configure_logging(force=True)
