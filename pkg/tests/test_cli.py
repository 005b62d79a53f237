"""Testes de ponta a ponta da linha de comando."""

import json

import numpy as np
import pytest
from PIL import Image as PILImage

from fqlab.cli.main import build_parser, main
from fqlab.models.predictor import write_predictions_csv
from fqlab.services.evaluation_service import filter_dataset
from fqlab.utils.dataset_io import load_split, read_manifest
from fqlab.utils.report_io import read_csv
from fqlab.utils.spectrum import FrequencyMask, MaskKind, band_partition, make_mask
from fqlab.utils.tensor_io import decode_tensor, encode_tensor


TRAIN_YAML = """\
train:
  recipe:
    epochs: 3
    batch_size: 8
    lr: 0.05
    widths: [4, 4, 4]
    probe_iterations: 2
"""


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Dataset Syn_B1 mínimo e um checkpoint treinado pela CLI."""
    root = tmp_path_factory.mktemp("cli")
    data, run = root / "data", root / "train"
    assert main([
        "synthgen", "--band", "b1", "--per-class", "4,2,2", "--seed", "5",
        "--out", str(data), "--no-previews",
    ]) == 0
    config = root / "experiment.yaml"
    config.write_text(TRAIN_YAML, encoding="utf-8")
    assert main([
        "--config", str(config), "train", "--data", str(data), "--out", str(run),
        "--epochs", "1", "--probe-filter", "lowpass:4",
    ]) == 0
    return {"root": root, "data": data, "run": run, "checkpoint": run / "checkpoint"}


def _config_json(path):
    return json.loads((path / "config.json").read_text(encoding="utf-8"))


@pytest.mark.unit
class TestExitCodes:
    """Testes para os códigos de saída."""

    def test_version(self):
        """Testar --version com saída 0."""
        assert main(["--version"]) == 0

    def test_argparse_errors(self):
        """Testar subcomando ausente e banda inválida com saída 2."""
        assert main([]) == 2
        assert main(["synthgen", "--band", "B5"]) == 2
        assert main(["synthgen", "--per-class", "1,2"]) == 2

    def test_invalid_log_level(self, tmp_path):
        """Testar nível de log inválido com saída 2."""
        assert main(["--log-level", "LOUD", "decode", str(tmp_path / "x.f32")]) == 2

    def test_missing_required_flag(self):
        """Testar --data ausente como erro de uso."""
        assert main(["adcs"]) == 2

    def test_invalid_pair_code(self, tmp_path):
        """Testar código de par inválido como erro de uso."""
        assert main(["bandstop-eval", "--data", str(tmp_path), "--checkpoint", str(tmp_path), "--pairs", "B11"]) == 2

    def test_runtime_errors(self, tmp_path):
        """Testar arquivo malformado e dataset ausente com saída 1."""
        bad = tmp_path / "bad.f32"
        bad.write_bytes(b"nope")
        assert main(["decode", str(bad)]) == 1
        assert main(["adcs", "--data", str(tmp_path / "missing")]) == 1

    def test_invalid_config_file(self, tmp_path):
        """Testar arquivo de configuração inválido."""
        config = tmp_path / "bad.yaml"
        config.write_text("dfm:\n  tau_tpr: 3\n", encoding="utf-8")
        assert main(["--config", str(config), "decode", str(tmp_path / "x.f32")]) == 1

    def test_parser_lists_commands(self):
        """Testar que todos os subcomandos estão registrados."""
        parser = build_parser()
        sub = next(a for a in parser._actions if a.dest == "command")
        assert set(sub.choices) == {
            "synthgen", "train", "bandstop-eval", "adcs", "dfm", "shortcut-report", "filter", "encode", "decode",
        }


@pytest.mark.integration
class TestPipeline:
    """Testes encadeando os subcomandos em um dataset mínimo."""

    def test_synthgen_outputs(self, pipeline):
        """Testar o DatasetLayout gerado e a configuração resolvida."""
        manifest = read_manifest(pipeline["data"])
        assert manifest.counts["train"] == {"C0": 4, "C1": 4, "C2": 4, "C3": 4}
        config = _config_json(pipeline["data"])
        assert config["command"] == "synthgen"
        assert config["synthgen"]["generation"]["seed"] == 5
        assert not list((pipeline["data"] / "train").rglob("*.png"))

    def test_train_outputs(self, pipeline):
        """Testar checkpoint, logs e a precedência das flags sobre o arquivo."""
        run = pipeline["run"]
        for name in ("checkpoint/architecture.json", "checkpoint/params.f32", "trainlog.csv",
                     "lr_schedule.csv", "trainlog.json", "probe_predictions.f32", "probe_labels.f32",
                     "probe_curves.png", "test_metrics.json"):
            assert (run / name).exists(), name
        recipe = _config_json(run)["train"]["recipe"]
        assert recipe["epochs"] == 1
        assert recipe["widths"] == [4, 4, 4]
        assert len(read_csv(run / "lr_schedule.csv")) == 1
        assert (run / "trainlog.csv").read_text(encoding="utf-8").startswith("# probe: test lowpass:4")
        assert decode_tensor(run / "probe_predictions.f32").shape == (1, 2, 8)

    def test_bandstop_eval(self, pipeline, tmp_path):
        """Testar as matrizes Δ gravadas."""
        assert main([
            "bandstop-eval", "--data", str(pipeline["data"]), "--checkpoint", str(pipeline["checkpoint"]),
            "--out", str(tmp_path), "--pairs", "B14,b23",
        ]) == 0
        assert sorted(p.name for p in tmp_path.glob("delta_*.csv")) == ["delta_B14.csv", "delta_B23.csv"]
        assert _config_json(tmp_path)["bandstop_eval"]["pairs"] == ["B14", "B23"]

    def test_adcs(self, pipeline, tmp_path):
        """Testar mapas ADCS e resumo por banda."""
        assert main(["adcs", "--data", str(pipeline["data"]), "--split", "train", "--out", str(tmp_path)]) == 0
        maps = decode_tensor(tmp_path / "adcs_class_3_C3.f32")
        assert maps.shape == (1, 32, 32)
        assert np.all(np.abs(maps) <= 3)
        assert (tmp_path / "adcs_class_0_C0.png").exists()
        summary = json.loads((tmp_path / "adcs_band_summary.json").read_text(encoding="utf-8"))
        assert set(summary["C3"]) == {"B1", "B2", "B3", "B4"}

    def test_dfm_and_shortcut_report(self, pipeline, tmp_path):
        """Testar DFMs gravados e o relatório reaplicado com checkpoint e com tabela externa."""
        dfm_dir = tmp_path / "dfm"
        assert main([
            "dfm", "--data", str(pipeline["data"]), "--checkpoint", str(pipeline["checkpoint"]),
            "--out", str(dfm_dir), "--x-grid", "1,5", "--report-x", "5", "--no-previews", "--workers", "2",
            "--batch-size", "7",
        ]) == 0
        assert _config_json(dfm_dir)["dfm"]["batch_size"] == 7
        assert (dfm_dir / "dfm_class_2_C2_top1.f32").exists()
        assert (dfm_dir / "shortcut_report.json").exists()
        assert not (dfm_dir / "previews").exists()

        report_dir = tmp_path / "report"
        assert main([
            "shortcut-report", "--data", str(pipeline["data"]), "--split", "test", "--dfm-dir", str(dfm_dir),
            "--checkpoint", str(pipeline["checkpoint"]), "--x", "5", "--out", str(report_dir),
        ]) == 0
        original = json.loads((dfm_dir / "shortcut_report.json").read_text(encoding="utf-8"))
        replayed = json.loads((report_dir / "shortcut_report.json").read_text(encoding="utf-8"))
        assert replayed["rows"] == original["rows"]

        test = load_split(pipeline["data"], "test")
        scores = np.eye(4)[test.labels]
        write_predictions_csv(tmp_path / "external.csv", test.ids, scores)
        table_dir = tmp_path / "table"
        assert main([
            "shortcut-report", "--data", str(pipeline["data"]), "--dfm-dir", str(dfm_dir),
            "--predictions", str(tmp_path / "external.csv"), "--out", str(table_dir),
        ]) == 0
        rows = json.loads((table_dir / "shortcut_report.json").read_text(encoding="utf-8"))["rows"]
        assert all(row["tpr_df"] == 1.0 and row["fpr_df"] == 0.0 and not row["shortcut"] for row in rows)

    def test_shortcut_report_requires_predictor(self, pipeline, tmp_path):
        """Testar relatório sem checkpoint nem tabela."""
        assert main([
            "shortcut-report", "--data", str(pipeline["data"]), "--dfm-dir", str(tmp_path), "--out", str(tmp_path),
        ]) == 2

    def test_shortcut_report_missing_dfm(self, pipeline, tmp_path):
        """Testar diretório de DFMs sem os arquivos das classes."""
        assert main([
            "shortcut-report", "--data", str(pipeline["data"]), "--dfm-dir", str(tmp_path),
            "--checkpoint", str(pipeline["checkpoint"]), "--out", str(tmp_path / "out"),
        ]) == 1

    def test_filter(self, pipeline, tmp_path):
        """Testar o dataset filtrado em disco."""
        out = tmp_path / "filtered"
        assert main([
            "filter", "--data", str(pipeline["data"]), "--mask", "bandstop:B2,B3", "--splits", "test",
            "--out", str(out),
        ]) == 0
        filtered = load_split(out, "test")
        original = load_split(pipeline["data"], "test")
        assert filtered.ids == original.ids
        assert not np.allclose(filtered.images, original.images)
        assert read_manifest(out).summary["mask"] == "bandstop:B2,B3"
        assert main(["filter", "--data", str(pipeline["data"]), "--mask", "bogus", "--out", str(tmp_path / "x")]) == 2

    def test_filter_with_stored_dfm(self, pipeline, tmp_path):
        """Testar filtragem com uma máscara gravada em .f32 via dfm:<arquivo>."""
        bits = make_mask(band_partition(32), MaskKind.LOW_PASS, cutoff=3).bits.copy()
        bits[16 + 9, 16 - 5] = True
        stored = FrequencyMask.symmetric(bits)
        mask_path = encode_tensor(stored.bits.astype(np.float32), tmp_path / "dfm_class_0_C0_top5.f32")

        out = tmp_path / "filtered"
        assert main([
            "filter", "--data", str(pipeline["data"]), "--mask", f"dfm:{mask_path}", "--splits", "test",
            "--out", str(out),
        ]) == 0
        original = load_split(pipeline["data"], "test")
        expected = filter_dataset(original, stored)
        filtered = load_split(out, "test")
        assert filtered.ids == original.ids
        np.testing.assert_allclose(filtered.images, expected.images, atol=1e-6)

        encode_tensor(np.ones((8, 8), dtype=np.float32), tmp_path / "small.f32")
        assert main([
            "filter", "--data", str(pipeline["data"]), "--mask", f"dfm:{tmp_path / 'small.f32'}",
            "--out", str(tmp_path / "y"),
        ]) == 2


@pytest.mark.unit
class TestTensorCommands:
    """Testes para encode/decode."""

    def test_encode_decode(self, tmp_path):
        """Testar PNG → .f32 com crop/resize e prévia PNG de volta."""
        png = tmp_path / "in.png"
        PILImage.fromarray(np.full((6, 8), 255, dtype=np.uint8)).save(png)
        assert main(["encode", str(png), str(tmp_path / "out.f32"), "--side", "4"]) == 0
        tensor = decode_tensor(tmp_path / "out.f32")
        assert tensor.shape == (1, 4, 4)
        assert np.allclose(tensor, 1.0)
        assert main(["decode", str(tmp_path / "out.f32"), "--output", str(tmp_path / "back.png")]) == 0
        assert (tmp_path / "back.png").exists()

    def test_decode_rejects_preview_of_two_channels(self, tmp_path):
        """Testar prévia PNG de tensor com 2 canais como erro de uso."""
        encode_tensor(np.zeros((2, 4, 4)), tmp_path / "two.f32")
        assert main(["decode", str(tmp_path / "two.f32"), "--output", str(tmp_path / "two.png")]) == 2
