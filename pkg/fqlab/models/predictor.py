"""
Preditores: o modelo treinado ou uma tabela externa de scores (id → vetor de scores).

Scores de qualquer preditor são tratados como logits; a classe predita é o argmax com
desempate em favor do menor índice de classe.
"""

import csv
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Tuple, Union

import numpy as np
from loguru import logger

from fqlab.core.exceptions import FqlabError
from fqlab.models.compact_resnet import CompactResNet, forward
from fqlab.utils.dataset_io import LabeledDataset


class PredictorError(FqlabError, ValueError):
    """Exceção para preditores incompatíveis com o dataset."""
    pass


class Predictor(Protocol):
    n_classes: int

    def scores(self, dataset: LabeledDataset) -> np.ndarray:
        ...


@dataclass
class ModelPredictor:
    """Preditor baseado no modelo (independe dos ids)."""
    model: CompactResNet
    batch_size: int = 512

    @property
    def n_classes(self) -> int:
        return self.model.n_classes

    def scores(self, dataset: LabeledDataset) -> np.ndarray:
        if dataset.channels != self.model.in_channels:
            raise PredictorError(
                f"Dataset com {dataset.channels} canais, modelo espera {self.model.in_channels}"
            )
        return forward(self.model, dataset.images, batch_size=self.batch_size)


@dataclass
class TablePredictor:
    """Preditor externo: scores fixos por id de amostra (ignora o conteúdo das imagens)."""
    table: Dict[str, np.ndarray]
    n_classes: int
    source: Optional[str] = field(default=None)

    @classmethod
    def from_csv(cls, path: Union[str, os.PathLike], n_classes: Optional[int] = None) -> "TablePredictor":
        """
        Ler um CSV `id,score_0,...,score_{k-1}`.

        Raises:
            PredictorError: Cabeçalho inválido, linha malformada ou id duplicado.
        """
        try:
            with open(path, "r", newline="", encoding="utf-8") as f:
                rows = list(csv.reader(f))
        except OSError as e:
            raise PredictorError(f"Não foi possível ler {path}: {e}") from e
        if not rows:
            raise PredictorError(f"Tabela de predições vazia: {path}")

        header = [h.strip() for h in rows[0]]
        k = len(header) - 1
        expected = ["id"] + [f"score_{i}" for i in range(k)]
        if k < 2 or header != expected:
            raise PredictorError(f"Cabeçalho inválido em {path}: {header}; esperado id,score_0,...")
        if n_classes is not None and k != n_classes:
            raise PredictorError(f"Tabela com {k} classes, esperado {n_classes}")

        table: Dict[str, np.ndarray] = {}
        for line_no, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != k + 1:
                raise PredictorError(f"Linha {line_no} de {path} com {len(row)} colunas, esperado {k + 1}")
            sample_id = row[0].strip()
            if sample_id in table:
                raise PredictorError(f"Id duplicado na linha {line_no} de {path}: {sample_id}")
            try:
                table[sample_id] = np.array([float(v) for v in row[1:]], dtype=np.float64)
            except ValueError as e:
                raise PredictorError(f"Score inválido na linha {line_no} de {path}: {e}") from e
        logger.info(f"📂 Tabela de predições com {len(table)} ids lida de {path}")
        return cls(table=table, n_classes=k, source=str(path))

    def scores(self, dataset: LabeledDataset) -> np.ndarray:
        missing = next((sample_id for sample_id in dataset.ids if sample_id not in self.table), None)
        if missing is not None:
            raise PredictorError(f"Id ausente na tabela de predições: {missing}")
        if not dataset.ids:
            return np.zeros((0, self.n_classes), dtype=np.float64)
        return np.stack([self.table[sample_id] for sample_id in dataset.ids])


def predict(predictor: Predictor, dataset: LabeledDataset) -> Tuple[np.ndarray, np.ndarray]:
    """Classes preditas (argmax, empate → menor índice) e matriz de scores."""
    if predictor.n_classes != dataset.n_classes:
        raise PredictorError(f"Preditor com {predictor.n_classes} classes, dataset com {dataset.n_classes}")
    scores = np.asarray(predictor.scores(dataset), dtype=np.float64)
    if scores.shape != (len(dataset), predictor.n_classes):
        raise PredictorError(f"Scores com shape {scores.shape}, esperado {(len(dataset), predictor.n_classes)}")
    labels = np.argmax(scores, axis=1).astype(np.int64) if len(dataset) else np.zeros(0, dtype=np.int64)
    return labels, scores


def write_predictions_csv(path: Union[str, os.PathLike], ids: List[str], scores: np.ndarray) -> None:
    """Gravar scores no mesmo formato lido por TablePredictor.from_csv."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id"] + [f"score_{i}" for i in range(scores.shape[1])])
        for sample_id, row in zip(ids, scores):
            writer.writerow([sample_id] + [repr(float(v)) for v in row])
