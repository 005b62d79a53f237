"""
Identificação de atalhos de frequência por Dominant Frequency Maps (DFM).

1. Pontuação: para cada par hermitiano único, a perda média da classe com o par removido
   de todos os canais menos a perda original.
2. Seleção: os top-X% pares por score formam o DFM (máscara simétrica).
3. Relatório: cada classe tem o teste inteiro filtrado pelo seu DFM; TPR e FPR altos no
   teste filtrado indicam um atalho.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger

from fqlab.core.config import DfmConfig
from fqlab.core.exceptions import FqlabError
from fqlab.models.predictor import ModelPredictor, Predictor, predict
from fqlab.schemas.reports import ShortcutReport, ShortcutRow
from fqlab.services.evaluation_service import filter_dataset
from fqlab.utils.dataset_io import LabeledDataset, class_dir_name, save_png_preview
from fqlab.utils.metrics import cross_entropy, tpr_fpr
from fqlab.utils.rendering import render_mask_png
from fqlab.utils.report_io import write_csv, write_json
from fqlab.utils.spectrum import FrequencyMask, dft2, idft2, remove_frequency_pair, unique_frequency_pairs
from fqlab.utils.tensor_io import decode_tensor, encode_tensor


class DfmError(FqlabError, ValueError):
    """Exceção para pontuações, DFMs ou relatórios inválidos."""
    pass


@dataclass
class FrequencyScoreMap:
    """Score de cada par hermitiano único (ordem canônica de unique_frequency_pairs)."""
    class_index: int
    class_name: str
    side: int
    scores: np.ndarray
    baseline: float
    provenance: Dict[str, str] = field(default_factory=dict)

    def to_grid(self) -> np.ndarray:
        """Grade (H, W) com o score do par em ambos os membros."""
        pairs = unique_frequency_pairs(self.side)
        return self.scores[pairs.pair_lookup()]


@dataclass
class DfmMask:
    """Máscara top-X% de uma classe e a ordem de seleção dos pares."""
    mask: FrequencyMask
    x_percent: float
    class_index: int
    selected: np.ndarray

    @property
    def bits(self) -> np.ndarray:
        return self.mask.bits

    def pair_set(self) -> frozenset:
        return frozenset(int(k) for k in self.selected)


def x_label(x_percent: float) -> str:
    return f"top{x_percent:g}"


def score_frequencies(
    predictor: Predictor,
    class_images: LabeledDataset,
    workers: int = 1,
) -> FrequencyScoreMap:
    """
    Pontuar cada par de frequências pelo aumento da perda ao removê-lo.

    A imagem modificada é a inversa do espectro sem o par e seu parceiro hermitiano. Um par
    nulo em todas as imagens não é avaliado e tem score exatamente 0.

    Raises:
        DfmError: Conjunto vazio ou com mais de uma classe.
    """
    if len(class_images) == 0:
        raise DfmError("Conjunto de imagens vazio para pontuação")
    present = np.unique(class_images.labels)
    if present.size != 1:
        raise DfmError(f"Imagens de mais de uma classe: {present.tolist()}")
    class_index = int(present[0])
    labels = class_images.labels

    spectrum = dft2(class_images.images.astype(np.float64))
    side = class_images.side
    pairs = unique_frequency_pairs(side)
    baseline = cross_entropy(predictor.scores(class_images), labels)
    if not math.isfinite(baseline):
        raise DfmError(f"Perda base não finita: {baseline}")

    def score_pair(k: int) -> float:
        i, j = pairs.indices[k]
        pi, pj = pairs.partners[k]
        if not (np.any(spectrum[..., i, j]) or np.any(spectrum[..., pi, pj])):
            return 0.0
        removed = idft2(remove_frequency_pair(spectrum, pairs.coord(k)))
        modified = class_images.with_images(removed.astype(np.float32))
        return cross_entropy(predictor.scores(modified), labels) - baseline

    logger.info(
        f"🔎 Pontuando {len(pairs)} pares de frequência para a classe {class_images.class_names[class_index]} "
        f"({len(class_images)} imagens)"
    )
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(score_pair, range(len(pairs))))
    else:
        scores = [score_pair(k) for k in range(len(pairs))]

    return FrequencyScoreMap(
        class_index=class_index,
        class_name=class_images.class_names[class_index],
        side=side,
        scores=np.asarray(scores, dtype=np.float64),
        baseline=baseline,
        provenance={"split": class_images.split},
    )


def select_topx(score_map: FrequencyScoreMap, x_percent: float) -> DfmMask:
    """
    Selecionar os ceil(X%·n_pares) pares de maior score.

    Empates: menor raio, depois menor coordenada em ordem de linha.
    """
    if not 0.0 < x_percent <= 100.0:
        raise DfmError(f"X deve estar em (0, 100], recebido {x_percent}")
    pairs = unique_frequency_pairs(score_map.side)
    n_pairs = len(pairs)
    if score_map.scores.shape != (n_pairs,):
        raise DfmError(f"Mapa com {score_map.scores.shape} scores, esperado {n_pairs}")

    n_selected = min(n_pairs, math.ceil(round(x_percent * n_pairs / 100.0, 9)))
    linear = pairs.indices[:, 0] * score_map.side + pairs.indices[:, 1]
    order = np.lexsort((linear, pairs.radius, -score_map.scores))
    selected = order[:n_selected]

    bits = np.zeros((score_map.side, score_map.side), dtype=bool)
    bits[pairs.indices[selected, 0], pairs.indices[selected, 1]] = True
    bits[pairs.partners[selected, 0], pairs.partners[selected, 1]] = True
    return DfmMask(mask=FrequencyMask(bits), x_percent=x_percent, class_index=score_map.class_index, selected=selected)


def filter_dataset_with_dfm(dataset: LabeledDataset, dfm: Union[DfmMask, FrequencyMask]) -> LabeledDataset:
    """Filtrar todas as imagens (de todas as classes) com o mesmo DFM."""
    mask = dfm.mask if isinstance(dfm, DfmMask) else dfm
    if mask.bits.shape != dataset.images.shape[-2:]:
        raise DfmError(f"DFM {mask.bits.shape} incompatível com imagens {dataset.images.shape[-2:]}")
    return filter_dataset(dataset, mask, note="dfm")


def shortcut_report(
    predictor: Predictor,
    testset: LabeledDataset,
    dfms: Dict[int, Union[DfmMask, FrequencyMask]],
    x_percent: float,
    tau_tpr: float = 0.5,
    tau_fpr: float = 0.10,
    provenance: Optional[Dict] = None,
) -> ShortcutReport:
    """
    TPR/FPR por classe no teste original e no teste filtrado pelo DFM da classe.

    Uma classe é marcada como atalho quando TPR_df ≥ τ_tpr e FPR_df ≥ τ_fpr.

    Raises:
        DfmError: DFM ausente para alguma classe.
    """
    missing = [name for c, name in enumerate(testset.class_names) if c not in dfms]
    if missing:
        raise DfmError(f"DFM ausente para a classe {missing[0]} (X={x_percent:g})")

    preds, _ = predict(predictor, testset)
    rows = []
    for c, name in enumerate(testset.class_names):
        original = tpr_fpr(preds, testset.labels, c)
        filtered_preds, _ = predict(predictor, filter_dataset_with_dfm(testset, dfms[c]))
        filtered = tpr_fpr(filtered_preds, testset.labels, c)
        flagged = (
            filtered.tpr is not None
            and filtered.fpr is not None
            and filtered.tpr >= tau_tpr
            and filtered.fpr >= tau_fpr
        )
        rows.append(ShortcutRow(
            class_index=c,
            class_name=name,
            tpr=original.tpr,
            fpr=original.fpr,
            tpr_df=filtered.tpr,
            fpr_df=filtered.fpr,
            shortcut=flagged,
        ))
        logger.info(
            f"📊 {name}: TPR {original.tpr} FPR {original.fpr} | w/ df TPR {filtered.tpr} FPR {filtered.fpr}"
            + (" ⚠️ atalho" if flagged else "")
        )
    return ShortcutReport(
        x_percent=x_percent, tau_tpr=tau_tpr, tau_fpr=tau_fpr, rows=rows, provenance=dict(provenance or {})
    )


def write_shortcut_report(report: ShortcutReport, out_dir: Union[str, os.PathLike], stem: str = "shortcut_report") -> Path:
    """Gravar o relatório em CSV e JSON com os mesmos valores."""
    out_dir = Path(out_dir)
    write_csv(
        out_dir / f"{stem}.csv",
        ["class_index", "class_name", "tpr", "fpr", "tpr_df", "fpr_df", "shortcut"],
        [[r.class_index, r.class_name, r.tpr, r.fpr, r.tpr_df, r.fpr_df, int(r.shortcut)] for r in report.rows],
        comments=[f"X={report.x_percent:g}% tau_tpr={report.tau_tpr} tau_fpr={report.tau_fpr}"],
    )
    write_json(out_dir / f"{stem}.json", report)
    return out_dir / f"{stem}.json"


def dfm_file_stem(class_index: int, class_name: str, x_percent: float) -> str:
    return f"dfm_{class_dir_name(class_index, class_name)}_{x_label(x_percent)}"


def save_dfm(dfm: DfmMask, class_name: str, out_dir: Union[str, os.PathLike]) -> Path:
    """Gravar o DFM como .f32 (1, H, W) com 0/1 e PNG branco sobre preto."""
    stem = Path(out_dir) / dfm_file_stem(dfm.class_index, class_name, dfm.x_percent)
    encode_tensor(dfm.bits.astype(np.float32)[None], stem.with_suffix(".f32"))
    render_mask_png(dfm.bits, stem.with_suffix(".png"))
    return stem.with_suffix(".f32")


def load_dfms(
    dfm_dir: Union[str, os.PathLike],
    class_names: Sequence[str],
    x_percent: float,
) -> Dict[int, FrequencyMask]:
    """
    Ler os DFMs gravados por `dfm` para as classes dadas; classes sem arquivo ficam de fora
    (shortcut_report rejeita o conjunto nomeando a classe).
    """
    dfm_dir = Path(dfm_dir)
    dfms = {}
    for c, name in enumerate(class_names):
        path = dfm_dir / f"{dfm_file_stem(c, name, x_percent)}.f32"
        if path.exists():
            dfms[c] = FrequencyMask(decode_tensor(path)[0] > 0.5)
        else:
            logger.warning(f"⚠️ DFM ausente: {path}")
    return dfms


def check_nesting(dfms_by_x: Dict[float, DfmMask]) -> None:
    """Verificar top-X1 ⊆ top-X2 para X1 < X2."""
    grid = sorted(dfms_by_x)
    for small, large in zip(grid, grid[1:]):
        if not dfms_by_x[small].pair_set() <= dfms_by_x[large].pair_set():
            raise DfmError(f"DFM top-{small:g}% não está contido no top-{large:g}%")


@dataclass
class DfmRun:
    score_maps: List[FrequencyScoreMap]
    dfms: Dict[float, Dict[int, DfmMask]]
    report: ShortcutReport


def run_dfm_analysis(
    predictor: Predictor,
    score_set: LabeledDataset,
    test_set: LabeledDataset,
    config: DfmConfig,
    out_dir: Union[str, os.PathLike],
    workers: int = 1,
) -> DfmRun:
    """
    Pontuar frequências por classe, gravar mapas e DFMs na grade de X, prévias filtradas
    e o relatório de atalhos em report_x.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if score_set.class_names != test_set.class_names:
        raise DfmError("Splits de pontuação e teste com classes diferentes")
    if isinstance(predictor, ModelPredictor) and predictor.batch_size != config.batch_size:
        predictor = replace(predictor, batch_size=config.batch_size)

    score_maps: List[FrequencyScoreMap] = []
    dfms: Dict[float, Dict[int, DfmMask]] = {x: {} for x in config.x_grid}
    for c, name in enumerate(score_set.class_names):
        class_images = score_set.by_class(c)
        if len(class_images) == 0:
            raise DfmError(f"Classe {name} sem imagens no split '{score_set.split}'")
        score_map = score_frequencies(predictor, class_images, workers=workers)
        score_maps.append(score_map)
        encode_tensor(score_map.to_grid()[None], out_dir / f"scores_{class_dir_name(c, name)}.f32")

        per_x = {x: select_topx(score_map, x) for x in config.x_grid}
        check_nesting(per_x)
        for x, dfm in per_x.items():
            dfms[x][c] = dfm
            save_dfm(dfm, name, out_dir)
        logger.info(f"✅ Classe {name}: baseline {score_map.baseline:.4f}, DFMs {', '.join(x_label(x) for x in config.x_grid)}")

    if config.previews:
        _write_previews(test_set, dfms[config.report_x], config.report_x, out_dir / "previews")

    report = shortcut_report(
        predictor,
        test_set,
        dfms[config.report_x],
        config.report_x,
        tau_tpr=config.tau_tpr,
        tau_fpr=config.tau_fpr,
        provenance={"score_split": score_set.split, "test_split": test_set.split},
    )
    write_shortcut_report(report, out_dir)
    return DfmRun(score_maps=score_maps, dfms=dfms, report=report)


def _write_previews(test_set: LabeledDataset, dfms: Dict[int, DfmMask], x_percent: float, out_dir: Path) -> None:
    """Primeira amostra de cada classe filtrada pelo DFM de cada classe."""
    first = [int(np.flatnonzero(test_set.labels == c)[0]) for c in range(test_set.n_classes) if np.any(test_set.labels == c)]
    samples = test_set.subset(first)
    for c, dfm in dfms.items():
        filtered = filter_dataset_with_dfm(samples, dfm)
        for image, label in zip(filtered.images, filtered.labels):
            target = out_dir / f"{dfm_file_stem(c, test_set.class_names[c], x_percent)}" / f"{class_dir_name(int(label), test_set.class_names[label])}.png"
            save_png_preview(np.clip(image, 0.0, 1.0), target)
