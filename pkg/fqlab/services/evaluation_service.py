"""
Avaliação em testes band-stop: para cada par de bandas mantidas (ex.: B14 mantém B1 e B4),
filtra o teste, prediz e compara com o teste original pela matriz de confusão relativa Δ.
"""

import os
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from loguru import logger

from fqlab.core.config import BAND_PAIR_CODES, parse_pair_code
from fqlab.core.exceptions import UsageError
from fqlab.models.predictor import Predictor, predict
from fqlab.schemas.reports import BandstopResult
from fqlab.utils.dataset_io import LabeledDataset
from fqlab.utils.metrics import ConfusionMatrix, RelativeConfusionMatrix, confusion, relative_confusion
from fqlab.utils.rendering import render_delta_png
from fqlab.utils.report_io import write_csv, write_json
from fqlab.utils.spectrum import FrequencyMask, MaskKind, band_partition, filter_image, make_mask


def filter_dataset(dataset: LabeledDataset, mask: FrequencyMask, note: Optional[str] = None) -> LabeledDataset:
    """Filtrar todas as imagens com a mesma máscara; rótulos e ids preservados."""
    return dataset.with_images(filter_image(dataset.images, mask), note=note)


def predict_confusion(predictor: Predictor, dataset: LabeledDataset) -> ConfusionMatrix:
    preds, _ = predict(predictor, dataset)
    return confusion(preds, dataset.labels, dataset.n_classes, dataset.class_names)


def evaluate_bandstop(
    predictor: Predictor,
    dataset: LabeledDataset,
    pairs: Sequence[str] = BAND_PAIR_CODES,
) -> List[Tuple[BandstopResult, RelativeConfusionMatrix]]:
    """
    Calcular Δ para cada par de bandas mantidas.

    Raises:
        UsageError: Código de par inválido.
    """
    try:
        kept = {code.upper(): parse_pair_code(code) for code in pairs}
    except ValueError as e:
        raise UsageError(str(e)) from e

    partition = band_partition(dataset.side, 4)
    cm_original = predict_confusion(predictor, dataset)
    logger.info(f"🔎 Acurácia no teste original: {cm_original.accuracy():.3f}")

    results = []
    for code, bands in kept.items():
        mask = make_mask(partition, MaskKind.KEEP_BANDS, bands=bands)
        cm_bandstop = predict_confusion(predictor, filter_dataset(dataset, mask, note=f"bandstop:{code}"))
        rel = relative_confusion(cm_bandstop, cm_original, sources={"bandstop": code, "original": dataset.split})
        results.append((
            BandstopResult(
                pair_code=code,
                kept_bands=[b.value for b in bands],
                class_names=list(dataset.class_names),
                n_per_class=rel.n_per_class.tolist(),
                delta=rel.rounded(1),
                confusion_original=cm_original.to_rows(),
                confusion_bandstop=cm_bandstop.to_rows(),
                accuracy_original=cm_original.accuracy(),
                accuracy_bandstop=cm_bandstop.accuracy(),
            ),
            rel,
        ))
        logger.info(f"📊 {code}: acurácia {cm_bandstop.accuracy():.3f}, diagonal Δ {[row[i] for i, row in enumerate(rel.rounded(1))]}")
    return results


def write_bandstop_outputs(
    results: Sequence[Tuple[BandstopResult, RelativeConfusionMatrix]],
    out_dir: Union[str, os.PathLike],
) -> Path:
    """Gravar delta_<par>.csv/.json/.png para cada par avaliado."""
    out_dir = Path(out_dir)
    for result, rel in results:
        stem = out_dir / f"delta_{result.pair_code}"
        write_csv(
            stem.with_suffix(".csv"),
            ["true_class"] + result.class_names,
            [[name] + row for name, row in zip(result.class_names, result.delta)],
            comments=[
                f"bandstop {result.pair_code} (bandas mantidas {','.join(result.kept_bands)})",
                "valores em pontos percentuais, arredondados para uma casa decimal",
            ],
        )
        write_json(stem.with_suffix(".json"), result)
        render_delta_png(rel.delta, result.class_names, stem.with_suffix(".png"), title=f"Δ {result.pair_code}")
    logger.info(f"💾 {len(results)} matrizes Δ gravadas em {out_dir}")
    return out_dir
