"""
Modelos pydantic para todos os registros de parâmetros do SPTC:
SLIC, estratégias de amostragem, padrões estruturados de remoção,
parâmetros ADMM e arquivos de configuração (run / bench).
"""

from enum import Enum
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from utils.logger import log_warning


class TransformKind(str, Enum):
    """Transformada unitária aplicada ao longo do modo 3."""
    DFT = "dft"
    DCT = "dct"


class Algorithm(str, Enum):
    """Algoritmos de completamento disponíveis."""
    SMNN = "smnn"
    STNN = "stnn"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# ---------------------------------------------------------------------------
# Superpixels
# ---------------------------------------------------------------------------

class SlicParams(_Frozen):
    """Parâmetros do SLIC (K, compacidade m, iterações, resíduo, janela de perturbação)."""
    n_segments: int = Field(..., ge=1)
    compactness: float = Field(10.0, gt=0)
    max_iters: int = Field(10, ge=1)
    residual_threshold: float = Field(1.0, gt=0)
    perturb_window: int = Field(3, ge=1)
    enforce_connectivity: bool = True

    @field_validator('compactness')
    def warn_compactness_range(cls, v):
        if not 1.0 <= v <= 20.0:
            log_warning("Compacidade fora do intervalo usual [1, 20]", extra={"compactness": v})
        return v

    @field_validator('perturb_window')
    def validate_window(cls, v):
        if v % 2 == 0:
            raise ValueError('perturb_window deve ser ímpar')
        return v


# ---------------------------------------------------------------------------
# Estratégias de amostragem
# ---------------------------------------------------------------------------

class CentroidStrategy(_Frozen):
    kind: Literal["centroid"] = "centroid"


class BoundaryStrategy(_Frozen):
    kind: Literal["boundary"] = "boundary"


class MultiStageStrategy(_Frozen):
    """Re-clusterização recursiva de cada superpixel."""
    kind: Literal["multistage"] = "multistage"
    stages: int = Field(2, ge=2)
    per_stage_fraction: Optional[float] = Field(None, gt=0, le=1)
    # Número de sub-clusters esperado por superpixel no primeiro nível
    branching: int = Field(4, ge=1)


class UniformRandomStrategy(_Frozen):
    kind: Literal["uniform"] = "uniform"
    seed: int = 0


SamplingStrategy = Annotated[
    Union[CentroidStrategy, BoundaryStrategy, MultiStageStrategy, UniformRandomStrategy],
    Field(discriminator="kind"),
]


# ---------------------------------------------------------------------------
# Padrões estruturados (removem pixels)
# ---------------------------------------------------------------------------

class CirclesPattern(_Frozen):
    kind: Literal["circles"] = "circles"
    count: int = Field(1, ge=0)
    radius: int = Field(5, ge=0)
    seed: int = 0


class LinesPattern(_Frozen):
    kind: Literal["lines"] = "lines"
    count: int = Field(1, ge=0)
    thickness: int = Field(1, ge=1)
    orientation: Literal["horizontal", "vertical"] = "horizontal"
    seed: int = 0


class ScratchesPattern(_Frozen):
    kind: Literal["scratches"] = "scratches"
    count: int = Field(1, ge=0)
    length: int = Field(20, ge=1)
    seed: int = 0


StructuredPattern = Annotated[
    Union[CirclesPattern, LinesPattern, ScratchesPattern],
    Field(discriminator="kind"),
]


# ---------------------------------------------------------------------------
# ADMM
# ---------------------------------------------------------------------------

class SmoothingConfig(_Frozen):
    """Suavização gaussiana aplicada a Z dentro do laço ADMM."""
    enabled: bool = True
    sigma: float = Field(0.5, gt=0)
    every_n_iters: int = Field(1, ge=1)


class AdmmParams(_Frozen):
    """
    Hiperparâmetros comuns ao SMNN e ao STNN.
    lam=None usa 1/sqrt(max(I1, I2)·I3), calculado a partir das dimensões da entrada.
    """
    lam: Optional[float] = Field(None, ge=0)
    mu0: float = Field(0.1, gt=0)
    alpha: float = Field(1.05, gt=1)
    mu_max: float = Field(1e4, gt=0)
    tol: float = Field(1e-5, gt=0)
    max_iters: int = Field(500, ge=1)
    smoothing: SmoothingConfig = SmoothingConfig()
    transform: TransformKind = TransformKind.DFT
    unfold_mode: int = Field(1, ge=1, le=3)
    divergence_limit: float = Field(1e6, gt=0)

    @model_validator(mode='after')
    def validate_penalty(self):
        if self.mu0 > self.mu_max:
            raise ValueError('mu0 deve ser <= mu_max')
        return self

    def resolved_lambda(self, dims) -> float:
        """λ efetivo para um tensor de dimensões (I1, I2, I3)."""
        if self.lam is not None:
            return float(self.lam)
        i1, i2, i3 = dims
        return 1.0 / float(max(i1, i2) * i3) ** 0.5


# ---------------------------------------------------------------------------
# Arquivos de configuração
# ---------------------------------------------------------------------------

class SamplingSection(_Frozen):
    strategy: SamplingStrategy = CentroidStrategy()
    ratio: Optional[float] = Field(None, gt=0, le=1)
    n_segments: Optional[int] = Field(None, ge=1)

    @model_validator(mode='after')
    def validate_budget(self):
        if self.ratio is None and self.n_segments is None:
            raise ValueError('informe ratio ou n_segments')
        return self


class SlicSection(_Frozen):
    compactness: float = Field(10.0, gt=0)
    max_iters: int = Field(10, ge=1)
    residual_threshold: float = Field(1.0, gt=0)
    enforce_connectivity: bool = True


class CompletionSection(_Frozen):
    algorithm: Algorithm = Algorithm.STNN
    params: AdmmParams = AdmmParams()


class OutputsSection(_Frozen):
    reconstruction: Optional[str] = None
    mask: Optional[str] = None
    samples: Optional[str] = None
    metrics: Optional[str] = None
    history: Optional[str] = None


class RunConfig(_Frozen):
    """Configuração completa de uma execução do pipeline amostrar -> completar."""
    inputs: List[str] = Field(default_factory=list)
    sampling: SamplingSection = SamplingSection(ratio=0.3)
    slic: SlicSection = SlicSection()
    completion: CompletionSection = CompletionSection()
    outputs: OutputsSection = OutputsSection()


class BenchConfig(_Frozen):
    """Grade de experimentos: imagens × estratégias × razões × algoritmos × sementes."""
    images: List[str] = Field(..., min_length=1)
    strategies: List[SamplingStrategy] = Field(default_factory=lambda: [CentroidStrategy()])
    ratios: List[float] = Field(default_factory=lambda: [0.70, 0.50, 0.30, 0.20, 0.10, 0.05])
    algorithms: List[Algorithm] = Field(default_factory=lambda: [Algorithm.STNN])
    seeds: List[int] = Field(default_factory=lambda: [0])
    smoothing: List[bool] = Field(default_factory=lambda: [True])
    patterns: List[StructuredPattern] = Field(default_factory=list)
    params: AdmmParams = AdmmParams()
    slic: SlicSection = SlicSection()
    workers: int = Field(1, ge=1)
    record_wall_time: bool = False
    resize: Optional[int] = Field(None, ge=11)

    @field_validator('ratios')
    def validate_ratios(cls, v):
        for ratio in v:
            if not 0 < ratio <= 1:
                raise ValueError(f'razão de amostragem fora de (0, 1]: {ratio}')
        return v
