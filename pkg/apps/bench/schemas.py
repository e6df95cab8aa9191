"""
Schemas do app bench: configuração de experimento (um único documento JSON).

Chaves desconhecidas são rejeitadas; o JSON de entrada e o ecoado em
config.json representam a mesma configuração.
"""

from enum import StrEnum
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from apps.methods.models import MethodKind
from apps.subsolver.models import SubsolverMode


def _settings():
    from config import settings

    return settings


class InstanceKind(StrEnum):
    HARD = "hard"
    BUILTIN = "builtin"
    PLUGIN = "plugin"


class InstanceSpec(BaseModel):
    """Qual função otimizar: f_k, um oráculo embutido ou um plugin "modulo:fabrica"."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: InstanceKind
    n: int | None = Field(default=None, ge=1)
    k: int | None = Field(default=None, ge=2)
    name: str | None = None
    target: str | None = None
    options: dict[str, int | float | str | bool] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_kind_fields(self):
        if self.kind == InstanceKind.HARD:
            if self.n is None or self.k is None:
                raise ValueError("Instância hard exige n e k.")
            if self.k > self.n:
                raise ValueError(f"k={self.k} maior que n={self.n}.")
        elif self.kind == InstanceKind.BUILTIN and not self.name:
            raise ValueError("Instância builtin exige name.")
        elif self.kind == InstanceKind.PLUGIN and (not self.target or ":" not in self.target):
            raise ValueError('Plugin exige target no formato "modulo:fabrica".')
        return self

    @property
    def slug(self) -> str:
        if self.kind == InstanceKind.HARD:
            return f"hard-n{self.n}-k{self.k}"
        if self.kind == InstanceKind.BUILTIN:
            return f"{self.name}-n{self.n}" if self.n else str(self.name)
        return str(self.target).replace(":", "-").replace(".", "-")


class MethodSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: MethodKind
    subsolver: SubsolverMode = SubsolverMode.AUTO


class RunParams(BaseModel):
    """
    Parâmetros numéricos. H0 vale para os adaptativos e M para os de constante
    fixa; sem M, a constante fixa sai da dica de Hölder da instância.
    D0 e R são substitutos informados pelo usuário das quantidades de análise
    (sem eles os relatórios de limitantes ficam parciais).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    p: Literal[2, 3] = 2
    nu: float = Field(default=1.0, ge=0.0, le=1.0)
    nu_known: bool = True
    theta: float = Field(default_factory=lambda: _settings().DEFAULT_THETA, ge=0.0)
    H0: float | None = Field(default=None, gt=0.0)
    M: float | None = Field(default=None, gt=0.0)
    eps: float | None = Field(default=None, gt=0.0, lt=1.0)
    gtol: float | None = Field(default=None, ge=0.0)
    max_outer_iters: int = Field(default=1000, ge=0)
    max_inner_iters: int = Field(default_factory=lambda: _settings().MAX_INNER_ITERS, ge=1)
    seed: int = 0
    x0: list[float] | None = None
    record_wall_time: bool = False
    D0: float | None = Field(default=None, gt=0.0)
    R: float | None = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def check_stopping(self):
        if self.eps is None and self.gtol is None:
            raise ValueError("Informe eps e/ou gtol.")
        return self


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    instance: InstanceSpec
    method: MethodSpec
    params: RunParams
    output_dir: str | None = None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def resolved_output_dir(self) -> Path:
        """Relativo a OUTPUT_ROOT (HOLDERTENSOR_OUTPUT_ROOT) quando não absoluto."""
        root = Path(_settings().OUTPUT_ROOT)
        if self.output_dir is None:
            return root / f"{self.method.kind}-{self.instance.slug}-seed{self.params.seed}"
        path = Path(self.output_dir).expanduser()
        return path if path.is_absolute() else root / path
