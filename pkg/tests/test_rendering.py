"""Testes para as figuras PNG (máscaras, ADCS, Δ e curvas de probe)."""

import numpy as np
import pytest
from PIL import Image as PILImage

from fqlab.schemas.training import ClassMetrics, TrainLog, TrainRecord
from fqlab.utils.rendering import (
    adcs_colors,
    render_adcs_png,
    render_delta_png,
    render_mask_png,
    render_probe_curves,
)


@pytest.mark.unit
class TestRendering:
    """Testes de renderização."""

    def test_mask_png(self, tmp_path):
        """Testar máscara em branco sobre preto, com ampliação."""
        bits = np.zeros((4, 4), dtype=bool)
        bits[1, 2] = True
        path = render_mask_png(bits, tmp_path / "mask.png", scale=2)
        with PILImage.open(path) as img:
            pixels = np.asarray(img)
        assert pixels.shape == (8, 8)
        assert pixels[2, 4] == 255
        assert pixels[0, 0] == 0

    def test_adcs_colors(self):
        """Testar zero em cinza médio e extremos distintos."""
        colors = adcs_colors(np.array([[-3.0, 0.0, 3.0]]), n_classes=4)
        assert colors.shape == (1, 3, 3)
        assert colors.dtype == np.uint8
        assert colors[0, 1].tolist() == [127, 127, 127]
        assert colors[0, 0, 2] > colors[0, 0, 0]
        assert colors[0, 2, 0] > colors[0, 2, 2]

    def test_adcs_png(self, tmp_path):
        """Testar o PNG RGB do mapa ADCS."""
        path = render_adcs_png(np.zeros((8, 8)), 4, tmp_path / "adcs.png", scale=3)
        with PILImage.open(path) as img:
            assert img.mode == "RGB"
            assert img.size == (24, 24)

    def test_delta_png(self, tmp_path):
        """Testar a figura da matriz Δ."""
        delta = np.array([[-2.0, 2.0], [0.0, -0.0]])
        path = render_delta_png(delta, ["C0", "C1"], tmp_path / "delta.png", title="Δ B14")
        assert path.exists() and path.stat().st_size > 0

    def test_probe_curves(self, tmp_path):
        """Testar curvas com probe e ausência de figura sem probe."""
        metrics = [ClassMetrics(precision=0.5, recall=0.5, f1=0.5)] * 2
        log = TrainLog(
            n_classes=2,
            class_names=["C0", "C1"],
            iterations=[
                TrainRecord(iteration=1, epoch=1, loss=0.7, lr=0.01, probe=metrics),
                TrainRecord(iteration=2, epoch=1, loss=0.6, lr=0.01, probe=metrics),
                TrainRecord(iteration=3, epoch=1, loss=0.5, lr=0.01),
            ],
        )
        assert render_probe_curves(log, tmp_path / "curves.png").exists()
        empty = TrainLog(n_classes=2, class_names=["C0", "C1"])
        assert render_probe_curves(empty, tmp_path / "none.png") is None
        assert not (tmp_path / "none.png").exists()
