"""Schemas dos relatórios de métricas (CSV/JSON)."""

from typing import Dict, List, Optional, Any

from pydantic import BaseModel, Field


class PrfRecord(BaseModel):
    """Precisão/recall/F1 de uma classe em uma avaliação."""
    class_index: int
    class_name: str
    precision: float = Field(..., ge=0.0, le=1.0)
    recall: float = Field(..., ge=0.0, le=1.0)
    f1: float = Field(..., ge=0.0, le=1.0)
    support: int = Field(..., ge=0)


class TprFpr(BaseModel):
    """TPR/FPR um-contra-todos; None indica classe ausente (taxa indefinida)."""
    class_index: int
    tpr: Optional[float] = None
    fpr: Optional[float] = None

    @property
    def absent(self) -> bool:
        return self.tpr is None


class BandstopResult(BaseModel):
    """Matriz de confusão relativa de um teste band-stop."""
    pair_code: str = Field(..., description="Código das bandas mantidas, ex.: B14")
    kept_bands: List[str]
    class_names: List[str]
    n_per_class: List[int]
    delta: List[List[float]] = Field(..., description="Δ em pontos percentuais")
    confusion_original: List[List[int]]
    confusion_bandstop: List[List[int]]
    accuracy_original: float
    accuracy_bandstop: float


class ShortcutRow(BaseModel):
    """Linha do relatório de atalhos para uma classe."""
    class_index: int
    class_name: str
    tpr: Optional[float]
    fpr: Optional[float]
    tpr_df: Optional[float]
    fpr_df: Optional[float]
    shortcut: bool


class ShortcutReport(BaseModel):
    """Relatório de atalhos de frequência (TPR/FPR original e com DFM)."""
    x_percent: float
    tau_tpr: float
    tau_fpr: float
    rows: List[ShortcutRow]
    provenance: Dict[str, Any] = Field(default_factory=dict)

    def flagged(self) -> List[str]:
        return [row.class_name for row in self.rows if row.shortcut]


class AcceptanceCheck(BaseModel):
    """Resultado de um critério verificado em um experimento Syn_b."""
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""


class ExperimentSummary(BaseModel):
    """Resumo de um experimento completo (geração, treino, band-stop, ADCS, DFM)."""
    dataset: str
    bias_band: str
    output_dir: str
    test_accuracy: List[float] = Field(default_factory=list, description="Acurácia por classe no teste")
    early_f1: List[float] = Field(default_factory=list, description="F1 médio por classe nas iterações de probe")
    checks: List[AcceptanceCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failed(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]
