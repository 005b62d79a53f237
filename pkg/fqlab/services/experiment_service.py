"""
Experimento completo em um dataset Syn_b: geração, treino, band-stop, ADCS e DFM.

O resumo registra os critérios esperados para o dataset sintético:
- a classe confinada à banda de viés (C3) é aprendida primeiro (F1 inicial maior);
- remover bandas fora de b pouco afeta C3, e C0 resiste a qualquer par de bandas;
- o ADCS de C3 é positivo dentro de b e negativo fora;
- o DFM top-5% de C0 recupera o padrão especial e marca C0 como atalho.
"""

import os
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from loguru import logger

from fqlab.core.config import BAND_PAIR_CODES, DfmConfig
from fqlab.models.checkpoint import save_checkpoint
from fqlab.models.predictor import ModelPredictor
from fqlab.schemas.dataset import GenerationConfig, SyntheticDatasetSpec
from fqlab.schemas.reports import AcceptanceCheck, ExperimentSummary
from fqlab.schemas.training import TrainConfig, TrainLog
from fqlab.services.dfm_service import run_dfm_analysis
from fqlab.services.evaluation_service import evaluate_bandstop, predict_confusion, write_bandstop_outputs
from fqlab.services.synthgen_service import SyntheticGenerator, generate_dataset
from fqlab.services.training_service import ProbeSet, Trainer, write_trainlog
from fqlab.utils.metrics import adcs, adcs_band_summary
from fqlab.utils.report_io import write_json
from fqlab.utils.spectrum import band_partition


EARLY_WINDOW = 500
EARLY_F1_MARGIN = 0.05
C3_DELTA_FLOOR = -5.0
C0_DELTA_FLOOR = -10.0
MIN_SPECIAL_PAIRS = 4
MIN_TPR_DF = 0.6
FPR_DF_RATIO = 2.0
MIN_TEST_ACCURACY = 0.9


def early_f1(log: TrainLog, window: int = EARLY_WINDOW) -> np.ndarray:
    """F1 médio por classe nas iterações de probe até `window`."""
    records = [r for r in log.probed() if r.iteration <= window]
    if not records:
        return np.zeros(log.n_classes)
    return np.array([[m.f1 for m in r.probe] for r in records]).mean(axis=0)


def _check(name: str, passed: bool, value: Optional[float] = None, threshold: Optional[float] = None,
           detail: str = "") -> AcceptanceCheck:
    check = AcceptanceCheck(name=name, passed=bool(passed), value=value, threshold=threshold, detail=detail)
    logger.info(f"{'✅' if check.passed else '❌'} {name}: {value} (limite {threshold}) {detail}".rstrip())
    return check


def run_syn_experiment(
    spec: SyntheticDatasetSpec,
    generation: GenerationConfig,
    recipe: TrainConfig,
    dfm_config: DfmConfig,
    out_dir: Union[str, os.PathLike],
    workers: int = 1,
    focus_class: int = 3,
) -> ExperimentSummary:
    """
    Executar o pipeline em um Syn_b e verificar os critérios do experimento.

    Saídas em out_dir: data/, train/, bandstop/, adcs/, dfm/ e summary.json.
    """
    out_dir = Path(out_dir)
    band = spec.bias_band
    special = spec.special_class
    checks: List[AcceptanceCheck] = []

    datasets = generate_dataset(spec, generation, out_dir=out_dir / "data", overwrite=True,
                                workers=workers, previews=False)
    train_set, val_set, test_set = datasets["train"], datasets["val"], datasets["test"]
    names = train_set.class_names

    result = Trainer(recipe).train(train_set, val_set, ProbeSet(test_set, "test"))
    save_checkpoint(result.model, out_dir / "train" / "checkpoint", class_names=names,
                    metadata={"spec": spec.name, "seed": recipe.seed})
    write_trainlog(result.log, out_dir / "train")
    predictor = ModelPredictor(result.model)

    f1 = early_f1(result.log)
    others = [f1[c] for c in range(len(names)) if c != focus_class]
    lead = float(f1[focus_class] - max(others))
    checks.append(_check(f"{names[focus_class]} aprendida primeiro", lead >= EARLY_F1_MARGIN, lead, EARLY_F1_MARGIN,
                         f"F1 médio até a iteração {EARLY_WINDOW}"))

    cm = predict_confusion(predictor, test_set)
    per_class = np.diag(cm.counts) / np.maximum(cm.n_per_class(), 1)
    checks.append(_check("acurácia por classe no teste", per_class.min() >= MIN_TEST_ACCURACY,
                         float(per_class.min()), MIN_TEST_ACCURACY))

    bandstop = evaluate_bandstop(predictor, test_set, BAND_PAIR_CODES)
    write_bandstop_outputs(bandstop, out_dir / "bandstop")
    retaining = [r for r, _ in bandstop if band.value in r.kept_bands]
    worst_focus = min(r.delta[focus_class][focus_class] for r in retaining)
    checks.append(_check(f"Δ {names[focus_class]} com {band.value} mantida", worst_focus >= C3_DELTA_FLOOR,
                         worst_focus, C3_DELTA_FLOOR, ", ".join(r.pair_code for r in retaining)))
    worst_special = min(r.delta[special][special] for r, _ in bandstop)
    checks.append(_check(f"Δ {names[special]} em todos os pares", worst_special >= C0_DELTA_FLOOR,
                         worst_special, C0_DELTA_FLOOR))

    adcs_map = adcs(train_set)
    partition = band_partition(spec.side)
    summary = adcs_band_summary(adcs_map, partition)
    write_json(out_dir / "adcs" / "adcs_band_summary.json", {
        name: {f"B{k + 1}": float(v) for k, v in enumerate(summary[c])} for c, name in enumerate(names)
    })
    half = spec.side // 2
    not_dc = np.ones(partition.labels.shape, dtype=bool)
    not_dc[half, half] = False
    in_band = (partition.labels == band.index) & not_dc
    out_band = (partition.labels != band.index) & not_dc
    focus_map = adcs_map.maps[focus_class]
    in_mean, out_mean = float(focus_map[in_band].mean()), float(focus_map[out_band].mean())
    checks.append(_check(f"ADCS {names[focus_class]} dentro de {band.value}", in_mean > 0.0, in_mean, 0.0))
    checks.append(_check(f"ADCS {names[focus_class]} fora de {band.value}", out_mean < 0.0, out_mean, 0.0))

    run = run_dfm_analysis(predictor, val_set, test_set, dfm_config, out_dir / "dfm", workers=workers)
    generator = SyntheticGenerator(spec, generation)
    recovered = len(run.dfms[dfm_config.report_x][special].pair_set() & set(generator.special_pairs.tolist()))
    checks.append(_check(f"padrão especial no DFM de {names[special]}", recovered >= MIN_SPECIAL_PAIRS,
                         float(recovered), float(MIN_SPECIAL_PAIRS),
                         f"de {generator.special_pairs.size} pares, X={dfm_config.report_x:g}%"))
    row = run.report.rows[special]
    tpr_df = row.tpr_df if row.tpr_df is not None else 0.0
    checks.append(_check(f"TPR com DFM de {names[special]}", tpr_df >= MIN_TPR_DF, tpr_df, MIN_TPR_DF))
    fpr, fpr_df = row.fpr or 0.0, row.fpr_df or 0.0
    checks.append(_check(f"FPR com DFM de {names[special]}", fpr_df >= FPR_DF_RATIO * fpr and fpr_df > 0.0,
                         fpr_df, FPR_DF_RATIO * fpr))

    experiment = ExperimentSummary(
        dataset=spec.name,
        bias_band=band.value,
        output_dir=str(out_dir),
        test_accuracy=[float(v) for v in per_class],
        early_f1=[float(v) for v in f1],
        checks=checks,
    )
    write_json(out_dir / "summary.json", experiment)
    logger.info(f"📋 {spec.name}: {len(checks) - len(experiment.failed())}/{len(checks)} critérios atendidos")
    return experiment
