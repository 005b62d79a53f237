"""Schemas para datasets sintéticos e manifestos de datasets em disco."""

from enum import Enum
from typing import Dict, List, Optional, Tuple, Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Band(str, Enum):
    """Bandas de frequência (anéis concêntricos, B1 a mais baixa)."""
    B1 = "B1"
    B2 = "B2"
    B3 = "B3"
    B4 = "B4"

    @property
    def index(self) -> int:
        """Índice 1-based da banda."""
        return int(self.value[1:])

    @classmethod
    def from_index(cls, index: int) -> "Band":
        return cls(f"B{index}")


ALL_BANDS: Tuple[Band, ...] = (Band.B1, Band.B2, Band.B3, Band.B4)

# Frequências (u, u) com u ímpar ≤ 15, presentes apenas na classe C0
SPECIAL_PATTERN: Tuple[Tuple[int, int], ...] = tuple((u, u) for u in (1, 3, 5, 7, 9, 11, 13, 15))

SPLITS: Tuple[str, ...] = ("train", "val", "test")


class SyntheticDatasetSpec(BaseModel):
    """Desenho de um dataset sintético Syn_b: bandas permitidas por classe e padrão especial."""

    model_config = ConfigDict(frozen=True)

    bias_band: Band = Field(..., description="Banda de viés b do dataset Syn_b")
    class_bands: Dict[int, List[Band]] = Field(..., description="Bandas permitidas por classe")
    special_pattern: List[Tuple[int, int]] = Field(
        default_factory=lambda: list(SPECIAL_PATTERN),
        description="Frequências do padrão especial (apenas C0)"
    )
    special_class: int = Field(default=0, description="Classe que carrega o padrão especial")
    side: int = Field(default=32, description="Lado das imagens em pixels")
    n_classes: int = Field(default=4, description="Número de classes")
    class_names: List[str] = Field(default_factory=lambda: ["C0", "C1", "C2", "C3"])

    @model_validator(mode="after")
    def validate_class_table(self):
        """Validar a tabela classe/banda contra o desenho Syn_b."""
        b = self.bias_band
        others = sorted((band for band in ALL_BANDS if band != b), key=lambda band: band.index)
        expected = {
            0: others,
            1: others,
            2: list(ALL_BANDS),
            3: [b],
        }
        actual = {cls: sorted(bands, key=lambda band: band.index) for cls, bands in self.class_bands.items()}
        if actual != expected:
            raise ValueError(f"Tabela de bandas inconsistente para Syn_{b.value}: {actual}")
        if len(self.class_names) != self.n_classes:
            raise ValueError("class_names deve ter n_classes entradas")
        if self.side % 2 != 0:
            raise ValueError(f"Lado da imagem deve ser par, recebido {self.side}")
        return self

    @property
    def name(self) -> str:
        return f"Syn_{self.bias_band.value}"


class GenerationConfig(BaseModel):
    """Parâmetros de geração de um dataset sintético."""

    n_train: int = Field(default=1000, ge=1, description="Amostras de treino por classe")
    n_val: int = Field(default=200, ge=1, description="Amostras de validação por classe")
    n_test: int = Field(default=200, ge=1, description="Amostras de teste por classe")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Semente de 64 bits")
    k_min: int = Field(default=8, description="Mínimo de frequências sorteadas por imagem")
    k_max: int = Field(default=24, description="Máximo de frequências sorteadas por imagem")
    amplitude_low: float = Field(default=0.5, gt=0.0, description="Limite inferior da amplitude sorteada")
    amplitude_high: float = Field(default=1.0, gt=0.0, description="Limite superior da amplitude sorteada")

    @model_validator(mode="after")
    def validate_ranges(self):
        """Validar limites de K e da lei de amplitude."""
        if self.k_min < 8:
            raise ValueError(f"k_min deve ser pelo menos 8, recebido {self.k_min}")
        if self.k_max < self.k_min:
            raise ValueError(f"k_max ({self.k_max}) menor que k_min ({self.k_min})")
        if self.amplitude_high < self.amplitude_low:
            raise ValueError("amplitude_high deve ser maior ou igual a amplitude_low")
        return self

    def per_split(self) -> Dict[str, int]:
        return {"train": self.n_train, "val": self.n_val, "test": self.n_test}


class DatasetManifest(BaseModel):
    """Manifesto gravado na raiz de um DatasetLayout."""

    format_version: int = 1
    generator: str = Field(default="fqlab", description="Origem do dataset")
    spec: Optional[SyntheticDatasetSpec] = None
    config: Optional[GenerationConfig] = None
    seed: Optional[int] = None
    channels: int = 1
    side: int = 32
    class_names: List[str] = Field(default_factory=list)
    counts: Dict[str, Dict[str, int]] = Field(default_factory=dict, description="split -> classe -> amostras")
    summary: Dict[str, Any] = Field(default_factory=dict, description="Estatísticas auxiliares (energia por banda)")

    @field_validator("counts")
    @classmethod
    def validate_counts(cls, v):
        for split, per_class in v.items():
            if any(n < 0 for n in per_class.values()):
                raise ValueError(f"Contagem negativa no split {split}")
        return v

    def total(self, split: str) -> int:
        return sum(self.counts.get(split, {}).values())
