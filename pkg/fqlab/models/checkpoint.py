"""
Checkpoints de modelo: um diretório com

    architecture.json   descritor (arquitetura, larguras, canais, classes, nomes e shapes dos parâmetros)
    params.f32          todos os parâmetros achatados na ordem do descritor, tensor (1, 1, N)
"""

import json
import os
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import torch
from loguru import logger

from fqlab.models.compact_resnet import ARCHITECTURE_NAME, CompactResNet, ModelError
from fqlab.utils.tensor_io import decode_tensor, encode_tensor


DESCRIPTOR_NAME = "architecture.json"
PARAMS_NAME = "params.f32"


def save_checkpoint(
    model: CompactResNet,
    path: Union[str, os.PathLike],
    class_names: Optional[List[str]] = None,
    metadata: Optional[Dict] = None,
) -> Path:
    """Gravar o checkpoint do modelo no diretório indicado."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    descriptor = model.descriptor()
    descriptor["class_names"] = list(class_names) if class_names else [f"C{i}" for i in range(model.n_classes)]
    descriptor["metadata"] = dict(metadata or {})

    with torch.no_grad():
        flat = torch.cat([p.detach().reshape(-1).float() for p in model.parameters()]).numpy()
    descriptor["n_parameters"] = int(flat.size)

    encode_tensor(flat.reshape(1, 1, -1), path / PARAMS_NAME)
    (path / DESCRIPTOR_NAME).write_text(json.dumps(descriptor, indent=2), encoding="utf-8")
    logger.info(f"💾 Checkpoint salvo em {path} ({flat.size} parâmetros)")
    return path


def load_checkpoint(path: Union[str, os.PathLike]) -> Tuple[CompactResNet, Dict]:
    """
    Ler um checkpoint e reconstruir o modelo.

    Raises:
        ModelError: Checkpoint ausente, arquitetura desconhecida ou parâmetros incompatíveis.
    """
    path = Path(path)
    descriptor_path = path / DESCRIPTOR_NAME
    if not descriptor_path.exists():
        raise ModelError(f"Checkpoint não encontrado: {descriptor_path}")
    try:
        descriptor = json.loads(descriptor_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelError(f"Descritor inválido em {descriptor_path}: {e}") from e

    if descriptor.get("architecture") != ARCHITECTURE_NAME:
        raise ModelError(f"Arquitetura desconhecida: {descriptor.get('architecture')}")

    model = CompactResNet(
        in_channels=descriptor["in_channels"],
        n_classes=descriptor["n_classes"],
        widths=descriptor["widths"],
    )
    flat = decode_tensor(path / PARAMS_NAME).reshape(-1)

    params = dict(model.named_parameters())
    offset = 0
    with torch.no_grad():
        for entry in descriptor["parameters"]:
            name, shape = entry["name"], tuple(entry["shape"])
            if name not in params or tuple(params[name].shape) != shape:
                raise ModelError(f"Parâmetro incompatível no checkpoint: {name} {shape}")
            size = int(np.prod(shape))
            if offset + size > flat.size:
                raise ModelError(f"params.f32 truncado: {flat.size} valores para {name}")
            params[name].copy_(torch.from_numpy(flat[offset:offset + size].reshape(shape).copy()))
            offset += size
    if offset != flat.size or len(descriptor["parameters"]) != len(params):
        raise ModelError(f"params.f32 com {flat.size} valores, descritor declara {offset}")

    model.eval()
    logger.debug(f"📂 Checkpoint carregado de {path}")
    return model, descriptor
