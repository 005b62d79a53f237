"""
Treino da CNN compacta com SGD (momentum + weight decay) e LR reduzido em platô da
perda de validação.

Nas primeiras `probe_iterations` iterações (a cada `probe_stride`), as predições no probe set
são guardadas e convertidas em precisão/recall/F1 por classe, para acompanhar a ordem em que
as classes são aprendidas.
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import torch
from loguru import logger
from torch.optim.lr_scheduler import ReduceLROnPlateau

from fqlab.models.compact_resnet import (
    CompactResNet,
    forward,
    init_model,
    loss_and_grads,
    make_optimizer,
    sgd_step,
)
from fqlab.schemas.training import ClassMetrics, EpochRecord, TrainConfig, TrainLog, TrainRecord
from fqlab.utils.dataset_io import DatasetError, LabeledDataset
from fqlab.utils.metrics import confusion, cross_entropy, prf1
from fqlab.utils.report_io import read_csv, write_csv, write_json
from fqlab.utils.tensor_io import encode_tensor


@dataclass
class ProbeSet:
    """Conjunto avaliado nas iterações iniciais (ex.: teste, teste passa-baixa)."""
    dataset: LabeledDataset
    description: str = "test"


@dataclass
class TrainResult:
    model: CompactResNet
    log: TrainLog
    probe_predictions: np.ndarray
    probe_labels: np.ndarray


def probe_metrics(preds: np.ndarray, labels: np.ndarray, class_names: List[str]) -> List[ClassMetrics]:
    """Precisão/recall/F1 por classe a partir das predições de uma iteração."""
    cm = confusion(preds, labels, len(class_names), class_names)
    return [ClassMetrics(precision=r.precision, recall=r.recall, f1=r.f1) for r in prf1(cm)]


def evaluate_loss(model: CompactResNet, dataset: LabeledDataset, batch_size: int = 512) -> Tuple[float, float]:
    """Perda média e acurácia do modelo no dataset."""
    logits = forward(model, dataset.images, batch_size=batch_size)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == dataset.labels))
    return cross_entropy(logits, dataset.labels), accuracy


class Trainer:
    """Laço de treino determinístico dado (config, dados)."""

    def __init__(self, config: Optional[TrainConfig] = None):
        self.config = config or TrainConfig()

    def train(
        self,
        train_set: LabeledDataset,
        val_set: LabeledDataset,
        probe: Optional[ProbeSet] = None,
    ) -> TrainResult:
        """
        Treinar o modelo.

        Raises:
            DatasetError: Treino ou validação vazios, ou classes/canais inconsistentes.
        """
        cfg = self.config
        if len(train_set) == 0:
            raise DatasetError("Dataset de treino vazio")
        if len(val_set) == 0:
            raise DatasetError("Dataset de validação vazio")
        if val_set.class_names != train_set.class_names or val_set.channels != train_set.channels:
            raise DatasetError("Treino e validação com classes ou canais diferentes")

        class_names = list(train_set.class_names)
        model = init_model(
            n_classes=len(class_names),
            seed=cfg.seed,
            in_channels=train_set.channels,
            widths=cfg.widths,
        )
        optimizer = make_optimizer(model, cfg)
        scheduler = ReduceLROnPlateau(
            optimizer, mode="min", factor=1.0 / cfg.plateau_factor, patience=cfg.plateau_patience
        )
        generator = torch.Generator().manual_seed(cfg.seed)

        x_all = torch.from_numpy(train_set.images)
        y_all = torch.from_numpy(train_set.labels)
        n = len(train_set)

        log = TrainLog(
            n_classes=len(class_names),
            class_names=class_names,
            probe_description=probe.description if probe else "",
        )
        probe_predictions: List[np.ndarray] = []
        iterations: List[TrainRecord] = []
        iteration = 0

        logger.info(
            f"🚀 Treinando {len(class_names)} classes: {n} amostras, {cfg.epochs} épocas, "
            f"batch {cfg.batch_size}, lr {cfg.lr}"
        )
        for epoch in range(1, cfg.epochs + 1):
            lr = optimizer.param_groups[0]["lr"]
            order = torch.randperm(n, generator=generator)
            losses = []
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                loss, grads = loss_and_grads(model, x_all[idx], y_all[idx])
                sgd_step(model, grads, optimizer)
                iteration += 1
                losses.append(loss)

                metrics = None
                if probe is not None and iteration <= cfg.probe_iterations and (iteration - 1) % cfg.probe_stride == 0:
                    logits = forward(model, probe.dataset.images, batch_size=cfg.eval_batch_size)
                    preds = np.argmax(logits, axis=1)
                    probe_predictions.append(preds)
                    log.probe_iterations.append(iteration)
                    metrics = probe_metrics(preds, probe.dataset.labels, class_names)

                iterations.append(TrainRecord(iteration=iteration, epoch=epoch, loss=loss, lr=lr, probe=metrics))
                logger.trace(f"Iteração {iteration}: loss={loss:.4f}")

            val_loss, val_accuracy = evaluate_loss(model, val_set, batch_size=cfg.eval_batch_size)
            scheduler.step(val_loss)
            log.epochs.append(EpochRecord(
                epoch=epoch,
                train_loss=float(np.mean(losses)),
                val_loss=val_loss,
                val_accuracy=val_accuracy,
                lr=lr,
            ))
            logger.info(
                f"📈 Época {epoch}/{cfg.epochs}: train_loss={np.mean(losses):.4f} "
                f"val_loss={val_loss:.4f} val_acc={val_accuracy:.3f} lr={lr:g}"
            )

        log.iterations = iterations
        probe_labels = probe.dataset.labels.copy() if probe else np.zeros(0, dtype=np.int64)
        stacked = np.stack(probe_predictions) if probe_predictions else np.zeros((0, probe_labels.size), dtype=np.int64)
        logger.info(f"✅ Treino concluído após {iteration} iterações")
        return TrainResult(model=model, log=log, probe_predictions=stacked, probe_labels=probe_labels)


def train(
    train_set: LabeledDataset,
    val_set: LabeledDataset,
    config: Optional[TrainConfig] = None,
    probe: Optional[ProbeSet] = None,
) -> TrainResult:
    """Atalho funcional para Trainer(config).train."""
    return Trainer(config).train(train_set, val_set, probe)


def _trainlog_header(class_names: List[str]) -> List[str]:
    header = ["iteration", "epoch", "loss", "lr"]
    for name in class_names:
        header += [f"precision_{name}", f"recall_{name}", f"f1_{name}"]
    return header


def write_trainlog(log: TrainLog, out_dir: Union[str, os.PathLike]) -> Path:
    """Gravar trainlog.csv (por iteração), lr_schedule.csv (por época) e trainlog.json."""
    out_dir = Path(out_dir)
    rows = []
    for record in log.iterations:
        row = [record.iteration, record.epoch, repr(record.loss), repr(record.lr)]
        if record.probe is None:
            row += [None] * (3 * log.n_classes)
        else:
            for m in record.probe:
                row += [repr(m.precision), repr(m.recall), repr(m.f1)]
        rows.append(row)
    write_csv(out_dir / "trainlog.csv", _trainlog_header(log.class_names), rows,
              comments=[f"probe: {log.probe_description}"])
    write_csv(
        out_dir / "lr_schedule.csv",
        ["epoch", "lr", "train_loss", "val_loss", "val_accuracy"],
        [[e.epoch, repr(e.lr), repr(e.train_loss), repr(e.val_loss), repr(e.val_accuracy)] for e in log.epochs],
    )
    write_json(out_dir / "trainlog.json", log)
    return out_dir / "trainlog.csv"


def read_trainlog_csv(path: Union[str, os.PathLike], class_names: List[str]) -> List[TrainRecord]:
    """Ler os registros por iteração de um trainlog.csv."""
    records = []
    for row in read_csv(path):
        probe = None
        if row[f"f1_{class_names[0]}"] != "":
            probe = [
                ClassMetrics(
                    precision=float(row[f"precision_{name}"]),
                    recall=float(row[f"recall_{name}"]),
                    f1=float(row[f"f1_{name}"]),
                )
                for name in class_names
            ]
        records.append(TrainRecord(
            iteration=int(row["iteration"]),
            epoch=int(row["epoch"]),
            loss=float(row["loss"]),
            lr=float(row["lr"]),
            probe=probe,
        ))
    return records


def write_probe_predictions(result: TrainResult, out_dir: Union[str, os.PathLike]) -> None:
    """Gravar as predições do probe (1, iterações, N) e os rótulos (1, 1, N)."""
    if result.probe_predictions.size == 0:
        return
    out_dir = Path(out_dir)
    encode_tensor(result.probe_predictions.astype(np.float32)[None], out_dir / "probe_predictions.f32")
    encode_tensor(result.probe_labels.astype(np.float32).reshape(1, 1, -1), out_dir / "probe_labels.f32")
