"""
Renderização estática das figuras do pipeline (PNG).

- DFM: um pixel por frequência, selecionadas em branco sobre preto
- ADCS: mapa divergente com zero em cinza médio e faixa simétrica ±(|C|−1)
- Δ: matriz anotada com uma casa decimal
- Curvas de probe: F1, precisão e recall por classe ao longo das iterações
"""

import os
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import LinearSegmentedColormap, Normalize  # noqa: E402
from PIL import Image as PILImage  # noqa: E402
from loguru import logger  # noqa: E402

from fqlab.schemas.training import TrainLog  # noqa: E402


# N ímpar: o valor central da LUT cai exatamente em (0.5, 0.5, 0.5)
ADCS_CMAP = LinearSegmentedColormap.from_list(
    "fqlab_adcs",
    [(0.13, 0.40, 0.67), (0.5, 0.5, 0.5), (0.70, 0.09, 0.17)],
    N=255,
)

PathLike = Union[str, os.PathLike]


def _upscale(image: PILImage.Image, scale: int) -> PILImage.Image:
    if scale <= 1:
        return image
    return image.resize((image.width * scale, image.height * scale), resample=PILImage.Resampling.NEAREST)


def render_mask_png(bits: np.ndarray, path: PathLike, scale: int = 1) -> Path:
    """Gravar uma máscara binária (H, W): True em branco, False em preto."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.where(np.asarray(bits, dtype=bool), 255, 0).astype(np.uint8)
    _upscale(PILImage.fromarray(pixels), scale).save(path, format="PNG")
    return path


def adcs_colors(values: np.ndarray, n_classes: int) -> np.ndarray:
    """Cores RGB uint8 (H, W, 3) de um mapa ADCS na faixa ±(n_classes − 1)."""
    bound = max(n_classes - 1, 1)
    norm = Normalize(vmin=-bound, vmax=bound, clip=True)
    rgba = ADCS_CMAP(norm(np.asarray(values, dtype=np.float64)), bytes=True)
    return np.ascontiguousarray(rgba[..., :3])


def render_adcs_png(values: np.ndarray, n_classes: int, path: PathLike, scale: int = 1) -> Path:
    """Gravar um mapa ADCS (H, W) com o mapa divergente (zero em cinza médio)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image = PILImage.fromarray(adcs_colors(values, n_classes))
    _upscale(image, scale).save(path, format="PNG")
    return path


def render_delta_png(
    delta: np.ndarray,
    class_names: Sequence[str],
    path: PathLike,
    title: Optional[str] = None,
) -> Path:
    """Gravar a matriz Δ (pontos percentuais) com anotações de uma casa decimal."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    delta = np.asarray(delta, dtype=np.float64)
    limit = max(float(np.abs(delta).max()), 1.0)

    fig, ax = plt.subplots(figsize=(1.2 * len(class_names) + 1.5, 1.2 * len(class_names) + 1.0))
    try:
        ax.imshow(delta, cmap="RdBu_r", vmin=-limit, vmax=limit)
        ax.set_xticks(range(len(class_names)), labels=list(class_names))
        ax.set_yticks(range(len(class_names)), labels=list(class_names))
        ax.set_xlabel("predito")
        ax.set_ylabel("verdadeiro")
        for i in range(delta.shape[0]):
            for j in range(delta.shape[1]):
                ax.text(j, i, f"{delta[i, j] + 0.0:.1f}", ha="center", va="center", fontsize=9)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, dpi=100)
    finally:
        plt.close(fig)
    return path


def render_probe_curves(log: TrainLog, path: PathLike) -> Optional[Path]:
    """Gravar as curvas de F1, precisão e recall por classe nas iterações com probe."""
    records = log.probed()
    if not records:
        logger.warning("⚠️ Nenhuma iteração com probe; curvas não geradas")
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    iterations = [r.iteration for r in records]

    fig, axes = plt.subplots(1, 3, figsize=(15, 4), sharex=True)
    try:
        for ax, metric in zip(axes, ("f1", "precision", "recall")):
            for c, name in enumerate(log.class_names):
                ax.plot(iterations, [getattr(r.probe[c], metric) for r in records], label=name, linewidth=1.0)
            ax.set_title(f"{metric} ({log.probe_description})")
            ax.set_xlabel("iteração")
            ax.set_ylim(-0.02, 1.02)
        axes[0].legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(path, dpi=100)
    finally:
        plt.close(fig)
    return path
