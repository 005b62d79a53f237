"""Schemas de configuração e histórico de treino."""

from typing import List, Optional

from pydantic import BaseModel, Field, model_validator


class TrainConfig(BaseModel):
    """Receita de otimização (SGD com momentum e LR em platô)."""

    lr: float = Field(default=0.01, gt=0.0, description="Learning rate inicial")
    momentum: float = Field(default=0.9, ge=0.0, description="Momentum do SGD")
    weight_decay: float = Field(default=1e-4, ge=0.0, description="Weight decay (L2 via gradiente)")
    batch_size: int = Field(default=128, ge=1, description="Tamanho do minibatch")
    epochs: int = Field(default=100, ge=1, description="Número de épocas")
    plateau_factor: float = Field(default=10.0, gt=1.0, description="Fator de redução do LR no platô")
    plateau_patience: int = Field(default=10, ge=0, description="Paciência em épocas sem melhora da validação")
    seed: int = Field(default=0, ge=0, description="Semente do treino (inicialização e embaralhamento)")
    widths: List[int] = Field(default_factory=lambda: [16, 32, 64], description="Larguras dos estágios residuais")
    probe_iterations: int = Field(default=500, ge=0, description="Iterações iniciais com métricas no probe set")
    probe_stride: int = Field(default=1, ge=1, description="Avaliar o probe a cada N iterações")
    eval_batch_size: int = Field(default=512, ge=1, description="Tamanho do batch de avaliação")

    @model_validator(mode="after")
    def validate_widths(self):
        if len(self.widths) != 3 or any(w <= 0 for w in self.widths):
            raise ValueError(f"widths deve ter 3 larguras positivas, recebido {self.widths}")
        return self


class ClassMetrics(BaseModel):
    """Precisão, recall e F1 de uma classe."""
    precision: float
    recall: float
    f1: float


class TrainRecord(BaseModel):
    """Registro por iteração."""
    iteration: int
    epoch: int
    loss: float
    lr: float
    probe: Optional[List[ClassMetrics]] = Field(default=None, description="Métricas por classe no probe set")


class EpochRecord(BaseModel):
    """Registro por época."""
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    lr: float


class TrainLog(BaseModel):
    """Histórico completo de um treino."""

    n_classes: int
    class_names: List[str]
    probe_description: str = "test"
    iterations: List[TrainRecord] = Field(default_factory=list)
    epochs: List[EpochRecord] = Field(default_factory=list)
    probe_iterations: List[int] = Field(default_factory=list, description="Iterações com predições do probe guardadas")

    @model_validator(mode="after")
    def validate_monotone(self):
        indices = [r.iteration for r in self.iterations]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("Índices de iteração devem ser estritamente crescentes")
        return self

    def probed(self) -> List[TrainRecord]:
        return [r for r in self.iterations if r.probe is not None]
