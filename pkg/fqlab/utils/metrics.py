"""
Métricas por classe: matriz de confusão, matriz de confusão relativa Δ, precisão/recall/F1,
TPR/FPR um-contra-todos e o mapa ADCS (diferença acumulada dos espectros médios por classe).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger

from fqlab.core.exceptions import FqlabError
from fqlab.schemas.reports import PrfRecord, TprFpr
from fqlab.utils.dataset_io import LabeledDataset
from fqlab.utils.spectrum import BandPartition, dft2


class MetricsError(FqlabError, ValueError):
    """Exceção para entradas inválidas de métricas."""
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i, j]: amostras da classe verdadeira i preditas como j."""
    counts: np.ndarray
    class_names: List[str]

    @property
    def n_classes(self) -> int:
        return int(self.counts.shape[0])

    def n_per_class(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def accuracy(self) -> float:
        total = int(self.counts.sum())
        return float(np.trace(self.counts)) / total if total else 0.0

    def to_rows(self) -> List[List[int]]:
        return self.counts.tolist()


@dataclass(frozen=True)
class RelativeConfusionMatrix:
    """Δ[i, j] em pontos percentuais entre um teste filtrado e o original."""
    delta: np.ndarray
    n_per_class: np.ndarray
    class_names: List[str]
    sources: Dict[str, str] = field(default_factory=dict)

    def rounded(self, decimals: int = 1) -> List[List[float]]:
        """Valores para relatório; -0.0 normalizado para 0.0."""
        return (np.round(self.delta, decimals) + 0.0).tolist()


def _as_label_array(values, name: str) -> np.ndarray:
    array = np.asarray(values)
    if array.ndim != 1:
        raise MetricsError(f"{name} deve ser 1D, recebido shape {array.shape}")
    if array.size and not np.issubdtype(array.dtype, np.integer):
        if not np.all(np.equal(np.mod(array, 1), 0)):
            raise MetricsError(f"{name} deve conter índices inteiros")
    return array.astype(np.int64)


def confusion(preds, labels, n_classes: int, class_names: Optional[Sequence[str]] = None) -> ConfusionMatrix:
    """Contar a matriz de confusão (linhas = classe verdadeira)."""
    preds = _as_label_array(preds, "preds")
    labels = _as_label_array(labels, "labels")
    if preds.shape != labels.shape:
        raise MetricsError(f"Tamanhos diferentes: {preds.size} predições e {labels.size} rótulos")
    if n_classes < 1:
        raise MetricsError(f"n_classes deve ser positivo, recebido {n_classes}")
    for name, values in (("preds", preds), ("labels", labels)):
        if values.size and (values.min() < 0 or values.max() >= n_classes):
            raise MetricsError(f"{name} com índice fora de [0, {n_classes})")

    counts = np.bincount(labels * n_classes + preds, minlength=n_classes * n_classes)
    names = list(class_names) if class_names is not None else [f"C{i}" for i in range(n_classes)]
    return ConfusionMatrix(counts=counts.reshape(n_classes, n_classes).astype(np.int64), class_names=names)


def relative_confusion(
    cm_bandstop: ConfusionMatrix,
    cm_original: ConfusionMatrix,
    sources: Optional[Dict[str, str]] = None,
) -> RelativeConfusionMatrix:
    """
    Δ = (Pred_bs − Pred_org) / N_c × 100, por linha (classe verdadeira).

    As diferenças são inteiras até a divisão final; linhas com N_c = 0 ficam zeradas.

    Raises:
        MetricsError: Classes diferentes ou somas de linha diferentes (populações distintas).
    """
    bs, org = cm_bandstop.counts, cm_original.counts
    if bs.shape != org.shape:
        raise MetricsError(f"Matrizes com shapes diferentes: {bs.shape} vs {org.shape}")
    n_per_class = org.sum(axis=1)
    mismatch = np.flatnonzero(bs.sum(axis=1) != n_per_class)
    if mismatch.size:
        c = int(mismatch[0])
        raise MetricsError(
            f"Somas de linha diferentes na classe {cm_original.class_names[c]}: "
            f"{int(bs[c].sum())} vs {int(n_per_class[c])} (conjuntos de teste distintos)"
        )

    diff = (bs - org).astype(np.int64)
    delta = np.zeros(diff.shape, dtype=np.float64)
    present = n_per_class > 0
    delta[present] = diff[present] * 100.0 / n_per_class[present, None]
    return RelativeConfusionMatrix(
        delta=delta,
        n_per_class=n_per_class.copy(),
        class_names=list(cm_original.class_names),
        sources=dict(sources or {}),
    )


def _ratio(num: float, den: float) -> float:
    return float(num) / float(den) if den else 0.0


def prf1(cm: ConfusionMatrix) -> List[PrfRecord]:
    """Precisão, recall e F1 por classe; denominadores nulos resultam em 0."""
    counts = cm.counts
    diag = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    records = []
    for c in range(cm.n_classes):
        precision = _ratio(diag[c], col[c])
        recall = _ratio(diag[c], row[c])
        f1 = _ratio(2.0 * precision * recall, precision + recall)
        records.append(PrfRecord(
            class_index=c,
            class_name=cm.class_names[c],
            precision=precision,
            recall=recall,
            f1=f1,
            support=int(row[c]),
        ))
    return records


def tpr_fpr(preds, labels, class_index: int) -> TprFpr:
    """
    TPR e FPR um-contra-todos da classe.

    TPR fica None quando a classe não aparece nos rótulos; FPR fica None quando não há
    amostras de outras classes.
    """
    preds = _as_label_array(preds, "preds")
    labels = _as_label_array(labels, "labels")
    if preds.shape != labels.shape:
        raise MetricsError(f"Tamanhos diferentes: {preds.size} predições e {labels.size} rótulos")

    positive = labels == class_index
    hit = preds == class_index
    n_pos = int(positive.sum())
    n_neg = int((~positive).sum())
    tpr = float((hit & positive).sum()) / n_pos if n_pos else None
    fpr = float((hit & ~positive).sum()) / n_neg if n_neg else None
    if tpr is None:
        logger.debug(f"Classe {class_index} ausente dos rótulos; TPR indefinido")
    return TprFpr(class_index=class_index, tpr=tpr, fpr=fpr)


def cross_entropy(scores, labels) -> float:
    """Entropia cruzada média com softmax sobre scores tratados como logits."""
    logits = np.asarray(scores, dtype=np.float64)
    labels = _as_label_array(labels, "labels")
    if logits.ndim != 2 or logits.shape[0] != labels.size:
        raise MetricsError(f"Scores {logits.shape} incompatíveis com {labels.size} rótulos")
    if labels.size == 0:
        raise MetricsError("Entropia cruzada de conjunto vazio")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise MetricsError(f"Rótulo fora de [0, {logits.shape[1]})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(labels.size), labels]
    return float(np.mean(log_norm - picked))


def class_average_spectrum(images) -> np.ndarray:
    """E_c(u, v): média de |F_x(u, v)| sobre as imagens de uma classe, por canal (C, H, W)."""
    x = np.asarray(images)
    if x.ndim != 4:
        raise MetricsError(f"Imagens devem ter shape (N, C, H, W), recebido {x.shape}")
    if x.shape[0] == 0:
        raise MetricsError("Classe vazia")
    return np.abs(dft2(x)).mean(axis=0)


@dataclass(frozen=True)
class AdcsMap:
    """Mapas ADCS por classe (K, H, W) e os intermediários por canal."""
    maps: np.ndarray
    channel_sums: np.ndarray
    class_spectra: np.ndarray
    class_names: List[str]

    @property
    def n_classes(self) -> int:
        return int(self.maps.shape[0])

    @property
    def bound(self) -> int:
        return self.n_classes - 1


def adcs(groups: Union[Sequence[np.ndarray], LabeledDataset], class_names: Optional[Sequence[str]] = None) -> AdcsMap:
    """
    ADCS^{ci}(u, v) = Σ_{j≠i} sign(E_ci(u, v) − E_cj(u, v)), somado por canal e depois
    promediado entre canais; sign(0) = 0.

    Args:
        groups: Imagens agrupadas por classe (lista de arrays (N_c, C, H, W)) ou um LabeledDataset
        class_names: Nomes das classes (padrão: do dataset ou C0..Ck-1)
    """
    if isinstance(groups, LabeledDataset):
        dataset = groups
        class_names = class_names or dataset.class_names
        groups = [dataset.images[dataset.labels == c] for c in range(dataset.n_classes)]

    groups = list(groups)
    if len(groups) < 2:
        raise MetricsError(f"ADCS requer pelo menos 2 classes, recebido {len(groups)}")
    names = list(class_names) if class_names is not None else [f"C{i}" for i in range(len(groups))]
    for name, images in zip(names, groups):
        if np.asarray(images).shape[0] == 0:
            raise MetricsError(f"Classe '{name}' sem imagens")
    shapes = {np.asarray(images).shape[1:] for images in groups}
    if len(shapes) != 1:
        raise MetricsError(f"Imagens com shapes diferentes entre classes: {sorted(shapes)}")

    spectra = np.stack([class_average_spectrum(images) for images in groups])
    signs = np.sign(spectra[:, None] - spectra[None, :]).astype(np.int64)
    channel_sums = signs.sum(axis=1)
    maps = channel_sums.mean(axis=1)
    return AdcsMap(maps=maps, channel_sums=channel_sums, class_spectra=spectra, class_names=names)


def adcs_band_summary(adcs_map: AdcsMap, partition: BandPartition) -> np.ndarray:
    """Média do ADCS de cada classe em cada banda, sem o DC: array (K, n_bands)."""
    if adcs_map.maps.shape[-2:] != partition.labels.shape:
        raise MetricsError("Mapa ADCS incompatível com a partição")
    half = partition.side // 2
    not_dc = np.ones(partition.labels.shape, dtype=bool)
    not_dc[half, half] = False
    summary = np.zeros((adcs_map.n_classes, partition.n_bands))
    for k in range(1, partition.n_bands + 1):
        members = (partition.labels == k) & not_dc
        if members.any():
            summary[:, k - 1] = adcs_map.maps[:, members].mean(axis=1)
    return summary
