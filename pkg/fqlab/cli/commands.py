"""
Handlers dos subcomandos do fqlab.

Cada handler recebe os argumentos do argparse e a ExperimentConfig carregada de --config;
flags explícitas sobrescrevem os valores do arquivo e a configuração resolvida é gravada em
<out>/config.json.
"""

import argparse
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, TypeVar

import numpy as np
from loguru import logger
from pydantic import BaseModel, ValidationError

from fqlab.core.config import ExperimentConfig, settings
from fqlab.core.exceptions import UsageError
from fqlab.models.checkpoint import load_checkpoint, save_checkpoint
from fqlab.models.predictor import ModelPredictor, Predictor, TablePredictor, predict
from fqlab.schemas.dataset import DatasetManifest
from fqlab.services.dfm_service import load_dfms, run_dfm_analysis, shortcut_report, write_shortcut_report
from fqlab.services.evaluation_service import evaluate_bandstop, filter_dataset, write_bandstop_outputs
from fqlab.services.synthgen_service import build_spec, generate_dataset
from fqlab.services.training_service import (
    ProbeSet,
    Trainer,
    write_probe_predictions,
    write_trainlog,
)
from fqlab.utils.dataset_io import (
    ensure_output_dir,
    load_dataset,
    load_png,
    load_split,
    read_manifest,
    save_png_preview,
    write_manifest,
    write_split,
)
from fqlab.utils.metrics import adcs, adcs_band_summary, confusion, prf1
from fqlab.utils.rendering import render_adcs_png, render_probe_curves
from fqlab.utils.report_io import write_csv, write_json
from fqlab.utils.spectrum import band_partition, parse_mask_spec
from fqlab.utils.tensor_io import decode_tensor, encode_tensor


Block = TypeVar("Block", bound=BaseModel)


def _merge(block: Block, overrides: Dict[str, Any]) -> Block:
    """Aplicar flags (valores não None) sobre um bloco de configuração."""
    updates = {key: value for key, value in overrides.items() if value is not None}
    if not updates:
        return block
    try:
        return type(block).model_validate({**block.model_dump(), **updates})
    except ValidationError as e:
        raise UsageError(f"Parâmetros inválidos: {e}") from e


def _resolve(config: ExperimentConfig, name: str, overrides: Dict[str, Any]) -> Tuple[ExperimentConfig, Any]:
    block = _merge(getattr(config, name), overrides)
    return config.model_copy(update={name: block}), block


def _require(value: Optional[str], flag: str) -> str:
    if not value:
        raise UsageError(f"Parâmetro obrigatório ausente: {flag}")
    return value


def _output_dir(out: Optional[str], command: str) -> Path:
    path = Path(out) if out else Path(settings.output_root) / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_resolved(config: ExperimentConfig, out_dir: Path, command: str) -> None:
    payload = {"command": command, **config.model_dump(mode="json")}
    write_json(out_dir / "config.json", payload)


def _workers(args: argparse.Namespace) -> int:
    workers = getattr(args, "workers", None) or settings.workers
    if workers < 1:
        raise UsageError(f"--workers deve ser positivo, recebido {workers}")
    return workers


def _load_predictor(
    checkpoint: Optional[str] = None,
    predictions: Optional[str] = None,
    batch_size: Optional[int] = None,
) -> Predictor:
    if predictions:
        return TablePredictor.from_csv(predictions)
    model, _ = load_checkpoint(_require(checkpoint, "--checkpoint"))
    return ModelPredictor(model) if batch_size is None else ModelPredictor(model, batch_size=batch_size)


def cmd_synthgen(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Gerar um dataset Syn_b no DatasetLayout."""
    generation = {"seed": args.seed, "k_min": args.k_min, "k_max": args.k_max}
    if args.per_class:
        generation.update(zip(("n_train", "n_val", "n_test"), args.per_class))
    gen_block = _merge(config.synthgen.generation, generation)
    config, block = _resolve(
        config, "synthgen", {"band": args.band, "out": args.out, "overwrite": args.overwrite or None, "generation": gen_block}
    )

    spec = build_spec(block.band)
    out_dir = Path(block.out) if block.out else Path(settings.output_root) / spec.name
    datasets = generate_dataset(
        spec,
        block.generation,
        out_dir=out_dir,
        overwrite=block.overwrite,
        workers=_workers(args),
        previews=not args.no_previews,
    )
    _write_resolved(config, out_dir, "synthgen")

    manifest = read_manifest(out_dir)
    print(f"✅ {spec.name} gravado em {out_dir}")
    for split, dataset in datasets.items():
        print(f"   {split}: {len(dataset)} imagens {manifest.counts[split]}")
    for name, fractions in manifest.summary["band_energy_train"].items():
        print(f"   energia por banda {name}: {fractions}")
    return 0


def cmd_train(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Treinar a CNN e gravar checkpoint, trainlog.csv e lr_schedule.csv."""
    recipe = _merge(config.train.recipe, {
        "epochs": args.epochs,
        "lr": args.lr,
        "batch_size": args.batch_size,
        "seed": args.seed,
        "probe_iterations": args.probe_iterations,
        "probe_stride": args.probe_stride,
    })
    config, block = _resolve(config, "train", {
        "data": args.data, "out": args.out, "probe_split": args.probe_split,
        "probe_filter": args.probe_filter, "recipe": recipe,
    })
    data = _require(block.data, "--data")
    out_dir = _output_dir(block.out, "train")

    train_set = load_split(data, "train")
    val_set = load_split(data, "val")
    probe_set = load_split(data, block.probe_split)
    description = block.probe_split
    if block.probe_filter:
        mask = parse_mask_spec(band_partition(probe_set.side), block.probe_filter)
        probe_set = filter_dataset(probe_set, mask, note=block.probe_filter)
        description = f"{block.probe_split} {block.probe_filter}"

    result = Trainer(block.recipe).train(train_set, val_set, ProbeSet(probe_set, description))
    save_checkpoint(result.model, out_dir / "checkpoint", class_names=train_set.class_names,
                    metadata={"data": data, "seed": block.recipe.seed})
    write_trainlog(result.log, out_dir)
    write_probe_predictions(result, out_dir)
    render_probe_curves(result.log, out_dir / "probe_curves.png")

    test_root = Path(data) / "test"
    if test_root.is_dir():
        test_set = load_split(data, "test")
        preds, _ = predict(ModelPredictor(result.model), test_set)
        records = prf1(confusion(preds, test_set.labels, test_set.n_classes, test_set.class_names))
        write_json(out_dir / "test_metrics.json", [r.model_dump() for r in records])
        for r in records:
            logger.info(f"📊 Teste {r.class_name}: P={r.precision:.3f} R={r.recall:.3f} F1={r.f1:.3f}")

    _write_resolved(config, out_dir, "train")
    print(f"✅ Treino concluído: {out_dir}")
    return 0


def cmd_bandstop_eval(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Avaliar Δ nos testes band-stop de cada par de bandas."""
    config, block = _resolve(config, "bandstop_eval", {
        "data": args.data, "checkpoint": args.checkpoint, "out": args.out,
        "split": args.split, "pairs": args.pairs,
    })
    predictor = _load_predictor(checkpoint=block.checkpoint)
    dataset = load_dataset(_require(block.data, "--data"), block.split)
    out_dir = _output_dir(block.out, "bandstop_eval")

    results = evaluate_bandstop(predictor, dataset, block.pairs)
    write_bandstop_outputs(results, out_dir)
    _write_resolved(config, out_dir, "bandstop-eval")
    print(f"✅ {len(results)} matrizes Δ gravadas em {out_dir}")
    return 0


def cmd_adcs(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Calcular os mapas ADCS por classe e o resumo por banda."""
    config, block = _resolve(config, "adcs", {"data": args.data, "split": args.split, "out": args.out})
    dataset = load_dataset(_require(block.data, "--data"), block.split, side=args.side)
    out_dir = _output_dir(block.out, "adcs")

    result = adcs(dataset)
    for c, name in enumerate(result.class_names):
        stem = out_dir / f"adcs_class_{c}_{name}"
        encode_tensor(result.maps[c][None], stem.with_suffix(".f32"))
        render_adcs_png(result.maps[c], result.n_classes, stem.with_suffix(".png"))

    partition = band_partition(dataset.side)
    summary = adcs_band_summary(result, partition)
    bands = [f"B{k}" for k in range(1, partition.n_bands + 1)]
    rows = [[name] + [repr(float(v)) for v in summary[c]] for c, name in enumerate(result.class_names)]
    write_csv(out_dir / "adcs_band_summary.csv", ["class"] + bands, rows, comments=["média do ADCS por banda, sem DC"])
    write_json(out_dir / "adcs_band_summary.json", {
        name: dict(zip(bands, (float(v) for v in summary[c]))) for c, name in enumerate(result.class_names)
    })
    _write_resolved(config, out_dir, "adcs")
    print(f"✅ Mapas ADCS de {result.n_classes} classes gravados em {out_dir}")
    return 0


def cmd_dfm(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Pontuar frequências, gerar DFMs na grade de X e o relatório de atalhos."""
    config, block = _resolve(config, "dfm", {
        "data": args.data, "checkpoint": args.checkpoint, "out": args.out,
        "score_split": args.score_split, "test_split": args.test_split,
        "x_grid": args.x_grid, "report_x": args.report_x,
        "tau_tpr": args.tau_tpr, "tau_fpr": args.tau_fpr,
        "batch_size": args.batch_size,
        "previews": False if args.no_previews else None,
    })
    predictor = _load_predictor(checkpoint=block.checkpoint, batch_size=block.batch_size)
    data = _require(block.data, "--data")
    score_set = load_dataset(data, block.score_split)
    test_set = load_dataset(data, block.test_split)
    out_dir = _output_dir(block.out, "dfm")

    run = run_dfm_analysis(predictor, score_set, test_set, block, out_dir, workers=_workers(args))
    _write_resolved(config, out_dir, "dfm")
    flagged = run.report.flagged()
    print(f"✅ DFMs gravados em {out_dir}; atalhos em X={block.report_x:g}%: {', '.join(flagged) or 'nenhum'}")
    return 0


def cmd_shortcut_report(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Aplicar DFMs existentes a um preditor e conjunto de teste quaisquer."""
    config, block = _resolve(config, "shortcut_report", {
        "data": args.data, "split": args.split, "dfm_dir": args.dfm_dir,
        "checkpoint": args.checkpoint, "predictions": args.predictions, "out": args.out,
        "x": args.x, "tau_tpr": args.tau_tpr, "tau_fpr": args.tau_fpr, "side": args.side,
    })
    if not block.checkpoint and not block.predictions:
        raise UsageError("Informe --checkpoint ou --predictions")
    predictor = _load_predictor(checkpoint=block.checkpoint, predictions=block.predictions)
    testset = load_dataset(_require(block.data, "--data"), block.split, side=block.side)
    dfms = load_dfms(_require(block.dfm_dir, "--dfm-dir"), testset.class_names, block.x)
    out_dir = _output_dir(block.out, "shortcut_report")

    report = shortcut_report(
        predictor, testset, dfms, block.x, tau_tpr=block.tau_tpr, tau_fpr=block.tau_fpr,
        provenance={"data": block.data, "dfm_dir": block.dfm_dir,
                    "predictor": block.predictions or block.checkpoint},
    )
    write_shortcut_report(report, out_dir)
    _write_resolved(config, out_dir, "shortcut-report")
    print(f"✅ Relatório gravado em {out_dir}; atalhos: {', '.join(report.flagged()) or 'nenhum'}")
    return 0


def cmd_filter(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Aplicar uma máscara de frequência a splits de um DatasetLayout."""
    config, block = _resolve(config, "filter", {
        "data": args.data, "mask": args.mask, "splits": args.splits,
        "out": args.out, "overwrite": args.overwrite or None,
    })
    data = _require(block.data, "--data")
    out_dir = ensure_output_dir(_require(block.out, "--out"), overwrite=block.overwrite)

    counts = {}
    filtered = None
    for split in block.splits:
        dataset = load_split(data, split)
        mask = parse_mask_spec(band_partition(dataset.side), block.mask)
        filtered = filter_dataset(dataset, mask, note=block.mask)
        write_split(filtered, out_dir)
        counts[split] = dict(zip(filtered.class_names, filtered.class_counts().tolist()))

    source = read_manifest(data)
    manifest = (source or DatasetManifest()).model_copy(update={
        "generator": "fqlab.filter",
        "counts": counts,
        "summary": {"mask": block.mask, "source": str(data)},
        "channels": filtered.channels,
        "side": filtered.side,
        "class_names": list(filtered.class_names),
    })
    write_manifest(manifest, out_dir)
    _write_resolved(config, out_dir, "filter")
    print(f"✅ Dataset filtrado ({block.mask}) gravado em {out_dir}")
    return 0


def cmd_encode(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Converter um PNG em tensor .f32."""
    image = load_png(args.input, side=args.side)
    encode_tensor(image, args.output)
    print(f"💾 {args.output}: {image.shape[0]}x{image.shape[1]}x{image.shape[2]}")
    return 0


def cmd_decode(args: argparse.Namespace, config: ExperimentConfig) -> int:
    """Ler um tensor .f32, mostrar o cabeçalho e opcionalmente gravar a prévia PNG."""
    tensor = decode_tensor(args.input)
    channels, height, width = tensor.shape
    print(f"{args.input}: {channels}x{height}x{width} min={float(tensor.min()):.6g} max={float(tensor.max()):.6g}")
    if args.output:
        if channels not in (1, 3):
            raise UsageError(f"Prévia PNG requer 1 ou 3 canais, tensor tem {channels}")
        save_png_preview(np.clip(tensor, 0.0, 1.0), args.output)
        print(f"💾 {args.output}")
    return 0
