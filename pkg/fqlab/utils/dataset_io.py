"""
Datasets rotulados em memória e o layout de datasets em disco.

Layout (DatasetLayout):
    root/manifest.json
    root/{train,val,test}/class_<idx>_<name>/<id>.f32   (autoritativo)
    root/{train,val,test}/class_<idx>_<name>/<id>.png   (prévia 8 bits)

Também aceita diretórios simples de classes com PNGs (uma pasta por classe).
"""

import os
import re
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from PIL import Image as PILImage

from fqlab.core.exceptions import FqlabError
from fqlab.schemas.dataset import DatasetManifest, SPLITS
from fqlab.utils.tensor_io import decode_tensor, encode_tensor


MANIFEST_NAME = "manifest.json"
_CLASS_DIR = re.compile(r"^class_(\d+)_(.+)$")


class DatasetError(FqlabError, ValueError):
    """Exceção para datasets inconsistentes ou ilegíveis."""
    pass


@dataclass
class LabeledDataset:
    """Imagens (N, C, H, W) em [0, 1] com rótulos, ids e proveniência."""
    images: np.ndarray
    labels: np.ndarray
    ids: List[str]
    class_names: List[str]
    split: str = "test"
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise DatasetError(f"Imagens devem ter shape (N, C, H, W), recebido {self.images.shape}")
        n = self.images.shape[0]
        if self.labels.shape != (n,) or len(self.ids) != n:
            raise DatasetError(f"Quantidades inconsistentes: {n} imagens, {self.labels.shape[0]} rótulos, {len(self.ids)} ids")
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise DatasetError(f"Rótulos fora de [0, {len(self.class_names)})")
        if len(set(self.ids)) != n:
            raise DatasetError("Ids de amostras duplicados")

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def channels(self) -> int:
        return int(self.images.shape[1])

    @property
    def side(self) -> int:
        return int(self.images.shape[-1])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            images=self.images[indices],
            labels=self.labels[indices],
            ids=[self.ids[i] for i in indices],
            class_names=list(self.class_names),
            split=self.split,
            provenance=dict(self.provenance),
        )

    def by_class(self, class_index: int) -> "LabeledDataset":
        return self.subset(np.flatnonzero(self.labels == class_index))

    def with_images(self, images: np.ndarray, note: Optional[str] = None) -> "LabeledDataset":
        """Mesmos rótulos e ids com novas imagens (ex.: versão filtrada)."""
        images = np.asarray(images, dtype=np.float32)
        if images.shape != self.images.shape:
            raise DatasetError(f"Shape {images.shape} difere do dataset {self.images.shape}")
        provenance = dict(self.provenance)
        if note:
            provenance["transforms"] = list(provenance.get("transforms", [])) + [note]
        return LabeledDataset(images, self.labels.copy(), list(self.ids), list(self.class_names), self.split, provenance)


def class_dir_name(index: int, name: str) -> str:
    return f"class_{index}_{name}"


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Converter (C, H, W) em [0, 1] para uint8 (H, W) ou (H, W, 3)."""
    x = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    x = np.rint(x * 255.0).astype(np.uint8)
    if x.shape[0] == 1:
        return x[0]
    return np.transpose(x, (1, 2, 0))


def save_png_preview(image: np.ndarray, path: Union[str, os.PathLike]) -> Path:
    """Gravar a prévia PNG 8 bits de uma imagem (1 ou 3 canais)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if image.shape[0] not in (1, 3):
        raise DatasetError(f"Prévia PNG requer 1 ou 3 canais, recebido {image.shape[0]}")
    PILImage.fromarray(to_uint8(image)).save(path, format="PNG")
    return path


def load_png(path: Union[str, os.PathLike], side: Optional[int] = None) -> np.ndarray:
    """Ler um PNG como float32 (C, H, W) em [0, 1], com crop central e resize opcionais."""
    with PILImage.open(path) as img:
        if img.mode in ("L", "LA", "1", "I;16", "I"):
            img = img.convert("L")
        else:
            img = img.convert("RGB")
        if side is not None:
            width, height = img.size
            edge = min(width, height)
            left, top = (width - edge) // 2, (height - edge) // 2
            img = img.crop((left, top, left + edge, top + edge))
            if edge != side:
                img = img.resize((side, side), resample=PILImage.Resampling.BILINEAR)
        array = np.asarray(img, dtype=np.uint8)
    if array.ndim == 2:
        array = array[None]
    else:
        array = np.transpose(array, (2, 0, 1))
    return array.astype(np.float32) / np.float32(255.0)


def write_split(dataset: LabeledDataset, root: Union[str, os.PathLike], previews: bool = True) -> Path:
    """Gravar um split no DatasetLayout (um .f32 e uma prévia .png por amostra)."""
    split_dir = Path(root) / dataset.split
    for image, sample_id in zip(dataset.images, dataset.ids):
        target = split_dir / sample_id
        try:
            encode_tensor(image, target.with_suffix(".f32"))
            if previews:
                save_png_preview(image, target.with_suffix(".png"))
        except OSError as e:
            raise DatasetError(f"Falha ao gravar {target}: {e}") from e
    logger.info(f"💾 Split '{dataset.split}' gravado em {split_dir} ({len(dataset)} amostras)")
    return split_dir


def write_manifest(manifest: DatasetManifest, root: Union[str, os.PathLike]) -> Path:
    path = Path(root) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_manifest(root: Union[str, os.PathLike]) -> Optional[DatasetManifest]:
    path = Path(root) / MANIFEST_NAME
    if not path.exists():
        return None
    try:
        return DatasetManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except Exception as e:
        raise DatasetError(f"Manifesto inválido em {path}: {e}") from e


def _class_dirs(path: Path) -> List[tuple]:
    dirs = sorted(p for p in path.iterdir() if p.is_dir())
    if not dirs:
        raise DatasetError(f"Nenhuma pasta de classe em {path}")
    parsed = [_CLASS_DIR.match(p.name) for p in dirs]
    if all(parsed):
        entries = sorted(((int(m.group(1)), m.group(2), p) for m, p in zip(parsed, dirs)), key=lambda e: e[0])
        indices = [e[0] for e in entries]
        if indices != list(range(len(entries))):
            raise DatasetError(f"Índices de classe não contíguos em {path}: {indices}")
        return entries
    return [(i, p.name, p) for i, p in enumerate(dirs)]


def ingest_image_dir(
    path: Union[str, os.PathLike],
    side: Optional[int] = None,
    split: Optional[str] = None,
) -> LabeledDataset:
    """
    Ler um diretório de classes (class_<idx>_<nome>/ ou uma pasta por classe).

    Para cada amostra o .f32 é autoritativo; PNGs são usados apenas quando não há .f32.

    Args:
        path: Diretório com uma pasta por classe
        side: Lado para crop central + resize dos PNGs (obrigatório se os tamanhos variarem)
        split: Nome do split para a proveniência (padrão: nome do diretório)
    """
    path = Path(path)
    if not path.is_dir():
        raise DatasetError(f"Diretório não encontrado: {path}")

    images: List[np.ndarray] = []
    labels: List[int] = []
    ids: List[str] = []
    class_names: List[str] = []

    for index, name, class_dir in _class_dirs(path):
        class_names.append(name)
        stems: Dict[str, Path] = {}
        for file in sorted(class_dir.iterdir()):
            suffix = file.suffix.lower()
            if suffix == ".f32":
                stems[file.stem] = file
            elif suffix == ".png" and file.stem not in stems:
                stems[file.stem] = file
        if not stems:
            logger.warning(f"⚠️ Classe '{name}' sem imagens em {class_dir}")
        for stem in sorted(stems):
            file = stems[stem]
            try:
                image = decode_tensor(file) if file.suffix.lower() == ".f32" else load_png(file, side=side)
            except OSError as e:
                raise DatasetError(f"Falha ao ler {file}: {e}") from e
            if images and image.shape[0] != images[0].shape[0]:
                raise DatasetError(
                    f"Número de canais incompatível em {file}: {image.shape[0]} vs {images[0].shape[0]}"
                )
            if images and image.shape != images[0].shape:
                raise DatasetError(
                    f"Tamanho incompatível em {file}: {image.shape[1:]} vs {images[0].shape[1:]} (use side para redimensionar)"
                )
            images.append(image)
            labels.append(index)
            ids.append(f"{class_dir.name}/{stem}")

    if not images:
        raise DatasetError(f"Nenhuma imagem encontrada em {path}")
    if images[0].shape[-1] != images[0].shape[-2]:
        raise DatasetError(f"Imagens devem ser quadradas, recebido {images[0].shape[1:]} (use side)")

    dataset = LabeledDataset(
        images=np.stack(images),
        labels=np.asarray(labels),
        ids=ids,
        class_names=class_names,
        split=split or path.name,
        provenance={"source": str(path)},
    )
    logger.info(f"📂 {len(dataset)} imagens de {len(class_names)} classes lidas de {path}")
    return dataset


def load_split(root: Union[str, os.PathLike], split: str, side: Optional[int] = None) -> LabeledDataset:
    """Ler um split de um DatasetLayout."""
    split_dir = Path(root) / split
    if not split_dir.is_dir():
        raise DatasetError(f"Split '{split}' ausente em {root}")
    dataset = ingest_image_dir(split_dir, side=side, split=split)
    manifest = read_manifest(root)
    if manifest is not None:
        dataset.provenance["manifest"] = str(Path(root) / MANIFEST_NAME)
        expected = manifest.counts.get(split)
        if expected is not None:
            actual = dict(zip(dataset.class_names, dataset.class_counts().tolist()))
            if actual != expected:
                raise DatasetError(f"Contagens do split '{split}' {actual} diferem do manifesto {expected}")
    return dataset


def load_dataset(
    path: Union[str, os.PathLike],
    split: Optional[str] = None,
    side: Optional[int] = None,
) -> LabeledDataset:
    """Ler um split de um DatasetLayout ou, se não houver split, um diretório simples de classes."""
    path = Path(path)
    if split and (path / split).is_dir():
        return load_split(path, split, side=side)
    if (path / MANIFEST_NAME).exists() and split:
        raise DatasetError(f"Split '{split}' ausente em {path}")
    return ingest_image_dir(path, side=side, split=split)


def load_layout(root: Union[str, os.PathLike], splits: Sequence[str] = SPLITS) -> Dict[str, LabeledDataset]:
    """Ler vários splits de um DatasetLayout; splits ausentes geram erro nomeando-os."""
    return {split: load_split(root, split) for split in splits}


def ensure_output_dir(path: Union[str, os.PathLike], overwrite: bool = False) -> Path:
    """Criar o diretório de saída, recusando diretórios não vazios sem overwrite.

    Com overwrite, os splits e o manifesto anteriores são apagados antes da escrita.
    """
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise DatasetError(f"Diretório de saída não vazio: {path} (use --overwrite)")
    if overwrite and path.exists():
        for split in SPLITS:
            if (path / split).is_dir():
                shutil.rmtree(path / split)
                logger.debug(f"🗑️ Split anterior removido: {path / split}")
        (path / MANIFEST_NAME).unlink(missing_ok=True)
    path.mkdir(parents=True, exist_ok=True)
    return path
