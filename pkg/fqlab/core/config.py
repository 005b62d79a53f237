"""
Configurações do fqlab usando Pydantic Settings.

Este módulo define as configurações de execução (logging, paralelismo, diretórios) e os blocos
de parâmetros de cada comando do pipeline (synthgen, train, bandstop-eval, adcs, dfm,
shortcut-report, filter).

Principais recursos:
- Validação automática de campos e dependências cross-field
- Perfis de ambiente (development, staging, production) que ajustam o nível de log
- Arquivos de override em JSON ou YAML (CONFIG_OVERRIDE_FILE)
- ExperimentConfig serializável: cada execução grava a configuração resolvida

Exemplo de uso:
    from fqlab.core.config import settings, ExperimentConfig

    config = ExperimentConfig.from_file("config-examples/experiment.json")
    print(config.dfm.x_grid)

Variáveis de ambiente importantes:
- FQLAB_PROFILE: Define o perfil (development/staging/production)
- FQLAB_LOG_LEVEL: Nível de log
- FQLAB_WORKERS: Threads para geração de dados e pontuação de frequências
- CONFIG_OVERRIDE_FILE: Arquivo adicional de configurações
"""

import os
import json
import re
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from fqlab.core.exceptions import ConfigError
from fqlab.schemas.dataset import Band, GenerationConfig
from fqlab.schemas.training import TrainConfig


BAND_PAIR_CODES: List[str] = ["B12", "B13", "B14", "B23", "B24", "B34"]
_PAIR_CODE = re.compile(r"^B([1-4])([1-4])$")


class Settings(BaseSettings):
    """
    Configurações de execução do fqlab.

    A classe automaticamente:
    - Carrega configurações do arquivo .env e de variáveis FQLAB_*
    - Aplica overrides de arquivos de configuração externos
    - Ajusta o nível de log conforme o perfil de ambiente
    """

    # Configurações de Log
    log_level: str = Field(default="INFO", description="Nível de log")
    log_format: str = Field(
        default="{time:YYYY-MM-DD HH:mm:ss} | {level} | {name}:{function}:{line} | {message}",
        description="Formato dos logs"
    )
    log_file: Optional[str] = Field(default=None, description="Arquivo de log (opcional)")
    log_rotation_size: str = Field(default="100 MB", description="Tamanho máximo do arquivo de log antes da rotação")
    log_retention_days: int = Field(default=30, description="Dias para retenção de logs")

    # Configurações de execução
    workers: int = Field(default=1, description="Threads para geração e pontuação de frequências")
    torch_threads: Optional[int] = Field(default=None, description="Limite de threads intra-op do torch")
    output_root: str = Field(default="runs", description="Diretório base para saídas sem --out")

    # Configurações de Ambiente
    profile: str = Field(default="production", description="Perfil de configuração (development, staging, production)")
    config_override_file: Optional[str] = Field(default=None, description="Arquivo de override de configuração")

    model_config = SettingsConfigDict(
        env_prefix="FQLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False,
        validate_assignment=True,
        str_strip_whitespace=True,
    )

    @model_validator(mode="after")
    def validate_cross_field_dependencies(self):
        """Validar dependências entre campos e aplicar configurações baseadas no perfil."""
        valid_profiles = ["development", "staging", "production"]
        if self.profile.lower() not in valid_profiles:
            raise ValueError(f"Perfil '{self.profile}' inválido. Use: {', '.join(valid_profiles)}")

        if self.profile.lower() == "development" and self.log_level.upper() == "INFO":
            object.__setattr__(self, "log_level", "DEBUG")

        valid_levels = ["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"]
        if self.log_level.upper() not in valid_levels:
            raise ValueError(f"Nível de log '{self.log_level}' inválido. Use: {', '.join(valid_levels)}")

        if self.workers <= 0:
            raise ValueError("Número de workers deve ser maior que 0")

        if self.torch_threads is not None and self.torch_threads <= 0:
            raise ValueError("torch_threads deve ser maior que 0")

        if self.log_retention_days < 0:
            raise ValueError("Dias de retenção de logs não pode ser negativo")

        return self

    @classmethod
    def load_override_file(cls, file_path: Optional[str] = None) -> Dict[str, Any]:
        """
        Carrega configurações de um arquivo de override.

        Args:
            file_path: Caminho para o arquivo de override. Se None, usa CONFIG_OVERRIDE_FILE.

        Returns:
            Dicionário com as configurações carregadas.

        Raises:
            ConfigError: Se o arquivo não existir ou o formato não for suportado.
        """
        if not file_path:
            file_path = os.getenv("CONFIG_OVERRIDE_FILE")

        if not file_path:
            return {}

        return load_config_document(file_path)

    @classmethod
    def create_with_overrides(cls, **kwargs) -> "Settings":
        """
        Cria uma instância de Settings com overrides específicos.

        Ordem de precedência: arquivo de override < kwargs < variáveis de ambiente.
        """
        override_config = cls.load_override_file()
        final_config = {**override_config, **kwargs}
        return cls(**final_config)


def load_config_document(file_path: str) -> Dict[str, Any]:
    """
    Ler um documento de configuração JSON ou YAML.

    Raises:
        ConfigError: Arquivo ausente, formato não suportado ou conteúdo inválido.
    """
    path = Path(file_path)
    if not path.exists():
        raise ConfigError(f"Arquivo de configuração não encontrado: {file_path}")

    suffix = path.suffix.lower()
    try:
        with open(path, "r", encoding="utf-8") as f:
            if suffix == ".json":
                data = json.load(f)
            elif suffix in (".yml", ".yaml"):
                data = yaml.safe_load(f)
            else:
                raise ConfigError(f"Formato de arquivo não suportado: {suffix}")
    except ConfigError:
        raise
    except Exception as e:
        raise ConfigError(f"Erro ao carregar arquivo de configuração {file_path}: {e}") from e

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Arquivo de configuração {file_path} deve conter um objeto")
    return data


def parse_pair_code(code: str) -> List[Band]:
    """Converter um código de par de bandas (ex.: "B14") nas bandas mantidas."""
    match = _PAIR_CODE.match(code.strip().upper())
    if not match or match.group(1) == match.group(2):
        raise ValueError(f"Código de par de bandas inválido: '{code}'. Use: {', '.join(BAND_PAIR_CODES)}")
    first, second = sorted(int(g) for g in match.groups())
    return [Band.from_index(first), Band.from_index(second)]


def _validate_percent(value: float) -> float:
    if not 0.0 < value <= 100.0:
        raise ValueError(f"Percentual X deve estar em (0, 100], recebido {value}")
    return value


def _validate_rate(value: float, name: str) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} deve estar entre 0.0 e 1.0, recebido {value}")
    return value


class SynthgenConfig(BaseModel):
    """Bloco do comando synthgen."""
    band: Band = Field(default=Band.B1, description="Banda de viés b")
    generation: GenerationConfig = Field(default_factory=GenerationConfig)
    out: Optional[str] = Field(default=None, description="Diretório do dataset")
    overwrite: bool = Field(default=False, description="Permitir sobrescrever diretório não vazio")


class TrainRunConfig(BaseModel):
    """Bloco do comando train."""
    data: Optional[str] = Field(default=None, description="Raiz do DatasetLayout")
    out: Optional[str] = Field(default=None, description="Diretório do checkpoint e dos logs")
    probe_split: str = Field(default="test", description="Split usado como probe set")
    probe_filter: Optional[str] = Field(default=None, description="Máscara aplicada ao probe (ex.: lowpass:4)")
    recipe: TrainConfig = Field(default_factory=TrainConfig)


class BandstopEvalConfig(BaseModel):
    """Bloco do comando bandstop-eval."""
    data: Optional[str] = None
    checkpoint: Optional[str] = None
    out: Optional[str] = None
    split: str = Field(default="test")
    pairs: List[str] = Field(default_factory=lambda: list(BAND_PAIR_CODES))

    @field_validator("pairs")
    @classmethod
    def validate_pairs(cls, v):
        for code in v:
            parse_pair_code(code)
        return [code.strip().upper() for code in v]


class AdcsConfig(BaseModel):
    """Bloco do comando adcs."""
    data: Optional[str] = None
    split: str = Field(default="train")
    out: Optional[str] = None


class DfmConfig(BaseModel):
    """Bloco do comando dfm."""
    data: Optional[str] = None
    checkpoint: Optional[str] = None
    out: Optional[str] = None
    score_split: str = Field(default="val", description="Split usado para pontuar frequências")
    test_split: str = Field(default="test", description="Split usado no relatório de atalhos")
    x_grid: List[float] = Field(default_factory=lambda: [1.0, 5.0, 10.0])
    report_x: float = Field(default=5.0)
    tau_tpr: float = Field(default=0.5)
    tau_fpr: float = Field(default=0.10)
    batch_size: int = Field(default=512, ge=1)
    previews: bool = Field(default=True, description="Gravar prévias DFM-filtradas")

    @field_validator("x_grid")
    @classmethod
    def validate_grid(cls, v):
        if not v:
            raise ValueError("x_grid não pode ser vazio")
        return sorted(_validate_percent(x) for x in v)

    @model_validator(mode="after")
    def validate_report(self):
        _validate_percent(self.report_x)
        _validate_rate(self.tau_tpr, "tau_tpr")
        _validate_rate(self.tau_fpr, "tau_fpr")
        if self.report_x not in self.x_grid:
            object.__setattr__(self, "x_grid", sorted(set(self.x_grid) | {self.report_x}))
        return self


class ShortcutReportConfig(BaseModel):
    """Bloco do comando shortcut-report (DFMs existentes aplicados a qualquer preditor/teste)."""
    data: Optional[str] = Field(default=None, description="DatasetLayout ou diretório de classes")
    split: Optional[str] = Field(default="test", description="Split do DatasetLayout (None para diretório simples)")
    dfm_dir: Optional[str] = None
    checkpoint: Optional[str] = None
    predictions: Optional[str] = Field(default=None, description="CSV externo id,score_0..score_k-1")
    out: Optional[str] = None
    x: float = Field(default=5.0)
    tau_tpr: float = Field(default=0.5)
    tau_fpr: float = Field(default=0.10)
    side: Optional[int] = Field(default=None, description="Lado para crop/resize na ingestão")

    @model_validator(mode="after")
    def validate_report(self):
        _validate_percent(self.x)
        _validate_rate(self.tau_tpr, "tau_tpr")
        _validate_rate(self.tau_fpr, "tau_fpr")
        if self.checkpoint and self.predictions:
            raise ValueError("Use checkpoint ou predictions, não ambos")
        return self


class FilterConfig(BaseModel):
    """Bloco do comando filter."""
    data: Optional[str] = None
    mask: str = Field(default="all", description="Especificação da máscara (ex.: bandstop:B2,B3)")
    splits: List[str] = Field(default_factory=lambda: ["train", "val", "test"])
    out: Optional[str] = None
    overwrite: bool = False


class ExperimentConfig(BaseModel):
    """Configuração completa e serializável de um experimento."""
    seed: Optional[int] = Field(default=None, description="Semente global (propaga para os blocos)")
    synthgen: SynthgenConfig = Field(default_factory=SynthgenConfig)
    train: TrainRunConfig = Field(default_factory=TrainRunConfig)
    bandstop_eval: BandstopEvalConfig = Field(default_factory=BandstopEvalConfig)
    adcs: AdcsConfig = Field(default_factory=AdcsConfig)
    dfm: DfmConfig = Field(default_factory=DfmConfig)
    shortcut_report: ShortcutReportConfig = Field(default_factory=ShortcutReportConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)

    @model_validator(mode="after")
    def propagate_seed(self):
        """Aplicar a semente global aos blocos que a usam."""
        if self.seed is not None:
            self.synthgen.generation.seed = self.seed
            self.train.recipe.seed = self.seed
        return self

    @classmethod
    def from_file(cls, file_path: Optional[str]) -> "ExperimentConfig":
        """Carregar de JSON/YAML; None devolve a configuração padrão."""
        if not file_path:
            return cls()
        data = load_config_document(file_path)
        try:
            return cls.model_validate(data)
        except Exception as e:
            raise ConfigError(f"Configuração inválida em {file_path}: {e}") from e


# Instância global das configurações
# Carrega automaticamente overrides se CONFIG_OVERRIDE_FILE estiver definido
try:
    settings = Settings.create_with_overrides()
except Exception as e:
    import warnings
    warnings.warn(f"Erro ao carregar configurações de override: {e}. Usando configuração padrão.")
    settings = Settings()
