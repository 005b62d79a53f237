"""Testes para datasets rotulados e o layout em disco."""

import numpy as np
import pytest
from PIL import Image as PILImage

from fqlab.schemas.dataset import DatasetManifest
from fqlab.utils.dataset_io import (
    DatasetError,
    LabeledDataset,
    ensure_output_dir,
    ingest_image_dir,
    load_dataset,
    load_layout,
    load_split,
    to_uint8,
    write_manifest,
    write_split,
)
from tests.conftest import make_dataset


def _write_png(path, array):
    path.parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(np.asarray(array, dtype=np.uint8)).save(path)


@pytest.mark.unit
class TestLabeledDataset:
    """Testes para o dataset em memória."""

    def test_validation(self):
        """Testar rejeição de shapes, rótulos e ids inconsistentes."""
        with pytest.raises(DatasetError):
            LabeledDataset(np.zeros((2, 8, 8)), [0, 1], ["a", "b"], ["C0", "C1"])
        with pytest.raises(DatasetError):
            LabeledDataset(np.zeros((2, 1, 8, 8)), [0, 2], ["a", "b"], ["C0", "C1"])
        with pytest.raises(DatasetError):
            LabeledDataset(np.zeros((2, 1, 8, 8)), [0, 1], ["a", "a"], ["C0", "C1"])

    def test_subset_and_with_images(self, rng):
        """Testar subset, by_class e with_images preservando rótulos e ids."""
        ds = make_dataset(rng.random((4, 1, 8, 8)), [0, 1, 0, 1])
        assert ds.by_class(1).ids == ["s0001", "s0003"]
        assert ds.class_counts().tolist() == [2, 2]
        filtered = ds.with_images(np.zeros_like(ds.images), note="all")
        assert filtered.ids == ds.ids
        assert filtered.provenance["transforms"] == ["all"]
        with pytest.raises(DatasetError):
            ds.with_images(np.zeros((4, 1, 4, 4)))

    def test_to_uint8(self):
        """Testar a conversão para prévias 8 bits."""
        assert to_uint8(np.array([[[0.0, 1.0, 2.0]]])).tolist() == [[0, 255, 255]]
        assert to_uint8(np.zeros((3, 2, 2))).shape == (2, 2, 3)


@pytest.mark.unit
class TestLayout:
    """Testes para gravação e leitura do DatasetLayout."""

    def test_split_round_trip(self, tmp_path, rng):
        """Testar que o .f32 gravado é lido de volta exatamente."""
        ds = LabeledDataset(
            images=rng.random((4, 1, 8, 8)),
            labels=[0, 0, 1, 1],
            ids=["class_0_A/00000", "class_0_A/00001", "class_1_B/00000", "class_1_B/00001"],
            class_names=["A", "B"],
            split="train",
        )
        write_split(ds, tmp_path)
        assert (tmp_path / "train" / "class_1_B" / "00001.png").exists()
        loaded = load_split(tmp_path, "train")
        assert loaded.class_names == ["A", "B"]
        assert loaded.ids == ds.ids
        assert np.array_equal(loaded.images, ds.images)
        assert loaded.labels.tolist() == [0, 0, 1, 1]

    def test_manifest_mismatch(self, tmp_path, rng):
        """Testar contagens divergentes do manifesto."""
        ds = LabeledDataset(rng.random((2, 1, 4, 4)), [0, 1], ["class_0_A/0", "class_1_B/0"], ["A", "B"], "test")
        write_split(ds, tmp_path, previews=False)
        write_manifest(DatasetManifest(class_names=["A", "B"], counts={"test": {"A": 2, "B": 1}}), tmp_path)
        with pytest.raises(DatasetError):
            load_split(tmp_path, "test")

    def test_missing_split_named(self, tmp_path, rng):
        """Testar que o split ausente é nomeado no erro."""
        ds = LabeledDataset(rng.random((2, 1, 4, 4)), [0, 1], ["class_0_A/0", "class_1_B/0"], ["A", "B"], "train")
        write_split(ds, tmp_path, previews=False)
        with pytest.raises(DatasetError, match="val"):
            load_layout(tmp_path)

    def test_ensure_output_dir(self, tmp_path):
        """Testar recusa de diretório não vazio sem overwrite."""
        out = ensure_output_dir(tmp_path / "out")
        (out / "file.txt").write_text("x")
        with pytest.raises(DatasetError):
            ensure_output_dir(out)
        assert ensure_output_dir(out, overwrite=True) == out

    def test_overwrite_clears_previous_splits(self, tmp_path, rng):
        """Testar que overwrite apaga splits e manifesto anteriores e preserva outros arquivos."""
        ds = LabeledDataset(rng.random((2, 1, 4, 4)), [0, 1], ["class_0_A/0", "class_1_B/0"], ["A", "B"], "train")
        write_split(ds, tmp_path)
        write_manifest(DatasetManifest(class_names=["A", "B"], counts={"train": {"A": 1, "B": 1}}), tmp_path)
        (tmp_path / "config.json").write_text("{}")

        ensure_output_dir(tmp_path, overwrite=True)

        assert not (tmp_path / "train").exists()
        assert not (tmp_path / "manifest.json").exists()
        assert (tmp_path / "config.json").exists()


@pytest.mark.unit
class TestImageFolders:
    """Testes para diretórios simples de PNGs."""

    def test_plain_class_folders(self, tmp_path):
        """Testar 2 classes x 3 imagens em pastas simples, com 255 -> 1.0."""
        for name in ("cat", "dog"):
            for i in range(3):
                _write_png(tmp_path / name / f"{i}.png", np.full((4, 4), 255))
        ds = ingest_image_dir(tmp_path)
        assert len(ds) == 6
        assert ds.class_names == ["cat", "dog"]
        assert ds.images.shape == (6, 1, 4, 4)
        assert np.all(ds.images == 1.0)

    def test_mixed_channels_rejected(self, tmp_path):
        """Testar rejeição de PNGs RGB misturados com tons de cinza."""
        _write_png(tmp_path / "a" / "0.png", np.zeros((4, 4)))
        _write_png(tmp_path / "b" / "0.png", np.zeros((4, 4, 3)))
        with pytest.raises(DatasetError):
            ingest_image_dir(tmp_path)

    def test_mixed_sizes_need_side(self, tmp_path):
        """Testar tamanhos diferentes: erro sem side, crop/resize com side."""
        _write_png(tmp_path / "a" / "0.png", np.zeros((8, 8)))
        _write_png(tmp_path / "b" / "0.png", np.zeros((6, 10)))
        with pytest.raises(DatasetError):
            ingest_image_dir(tmp_path)
        ds = load_dataset(tmp_path, side=4)
        assert ds.images.shape == (2, 1, 4, 4)

    def test_missing_directory(self, tmp_path):
        """Testar diretório inexistente."""
        with pytest.raises(DatasetError):
            ingest_image_dir(tmp_path / "nope")
