"""Testes para o laço de treino, o probe set e o trainlog."""

import numpy as np
import pytest
import torch

from fqlab.schemas.training import TrainConfig
from fqlab.services.training_service import (
    ProbeSet,
    Trainer,
    probe_metrics,
    read_trainlog_csv,
    train,
    write_probe_predictions,
    write_trainlog,
)
from fqlab.utils.dataset_io import DatasetError
from fqlab.utils.report_io import read_csv
from fqlab.utils.tensor_io import decode_tensor


def _config(**overrides):
    values = dict(epochs=2, batch_size=8, lr=0.05, widths=[4, 4, 4], probe_iterations=3, seed=4)
    values.update(overrides)
    return TrainConfig(**values)


@pytest.mark.unit
class TestTrainer:
    """Testes para o treino determinístico."""

    def test_iterations_and_epochs(self, syn_b1_small):
        """Testar um registro por iteração e um por época."""
        result = train(syn_b1_small["train"], syn_b1_small["val"], _config())
        assert [r.iteration for r in result.log.iterations] == [1, 2, 3, 4, 5, 6]
        assert [r.epoch for r in result.log.iterations] == [1, 1, 1, 2, 2, 2]
        assert len(result.log.epochs) == 2
        assert result.log.epochs[0].lr == pytest.approx(0.05)
        assert all(np.isfinite(r.loss) for r in result.log.iterations)

    def test_determinism(self, syn_b1_small):
        """Testar TrainLog e parâmetros idênticos para a mesma semente."""
        probe = ProbeSet(syn_b1_small["test"], "test")
        a = Trainer(_config()).train(syn_b1_small["train"], syn_b1_small["val"], probe)
        b = Trainer(_config()).train(syn_b1_small["train"], syn_b1_small["val"], probe)
        assert a.log.model_dump() == b.log.model_dump()
        params_b = dict(b.model.named_parameters())
        assert all(torch.equal(p, params_b[name]) for name, p in a.model.named_parameters())
        assert np.array_equal(a.probe_predictions, b.probe_predictions)

    def test_probe_records(self, syn_b1_small):
        """Testar métricas do probe nas primeiras iterações, coerentes com as predições guardadas."""
        probe = ProbeSet(syn_b1_small["test"], "test lowpass:4")
        result = train(syn_b1_small["train"], syn_b1_small["val"], _config(), probe)
        probed = result.log.probed()
        assert [r.iteration for r in probed] == [1, 2, 3]
        assert result.log.probe_iterations == [1, 2, 3]
        assert result.probe_predictions.shape == (3, 12)
        for k, record in enumerate(probed):
            expected = probe_metrics(result.probe_predictions[k], result.probe_labels, result.log.class_names)
            assert record.probe == expected
        assert result.log.probe_description == "test lowpass:4"

    def test_probe_stride(self, syn_b1_small):
        """Testar probe a cada 2 iterações."""
        probe = ProbeSet(syn_b1_small["test"])
        result = train(syn_b1_small["train"], syn_b1_small["val"], _config(probe_iterations=6, probe_stride=2), probe)
        assert result.log.probe_iterations == [1, 3, 5]

    def test_empty_dataset(self, syn_b1_small):
        """Testar treino ou validação vazios."""
        empty = syn_b1_small["train"].subset([])
        with pytest.raises(DatasetError):
            train(empty, syn_b1_small["val"], _config())
        with pytest.raises(DatasetError):
            train(syn_b1_small["train"], empty, _config())


@pytest.mark.integration
class TestTrainlogFiles:
    """Testes para os arquivos do treino."""

    def test_csv_round_trip(self, tmp_path, syn_b1_small):
        """Testar que o trainlog.csv relido reproduz os registros."""
        probe = ProbeSet(syn_b1_small["test"])
        result = train(syn_b1_small["train"], syn_b1_small["val"], _config(), probe)
        write_trainlog(result.log, tmp_path)
        records = read_trainlog_csv(tmp_path / "trainlog.csv", result.log.class_names)
        assert [r.model_dump() for r in records] == [r.model_dump() for r in result.log.iterations]
        assert (tmp_path / "trainlog.csv").read_text(encoding="utf-8").startswith("# probe: test")
        schedule = read_csv(tmp_path / "lr_schedule.csv")
        assert [int(row["epoch"]) for row in schedule] == [1, 2]
        assert (tmp_path / "trainlog.json").exists()

    def test_probe_predictions_tensor(self, tmp_path, syn_b1_small):
        """Testar o tensor de predições do probe (1, iterações, N)."""
        probe = ProbeSet(syn_b1_small["test"])
        result = train(syn_b1_small["train"], syn_b1_small["val"], _config(), probe)
        write_probe_predictions(result, tmp_path)
        predictions = decode_tensor(tmp_path / "probe_predictions.f32")
        assert predictions.shape == (1, 3, 12)
        assert np.array_equal(predictions[0].astype(np.int64), result.probe_predictions)
        assert decode_tensor(tmp_path / "probe_labels.f32").reshape(-1).tolist() == result.probe_labels.tolist()

    def test_no_probe_no_tensor(self, tmp_path, syn_b1_small):
        """Testar que sem probe nenhum tensor é gravado."""
        result = train(syn_b1_small["train"], syn_b1_small["val"], _config())
        write_probe_predictions(result, tmp_path)
        assert not (tmp_path / "probe_predictions.f32").exists()
