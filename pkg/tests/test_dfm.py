"""Testes para pontuação de frequências, DFMs e o relatório de atalhos."""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import pytest

from fqlab.core.config import DfmConfig
from fqlab.models.compact_resnet import forward
from fqlab.models.predictor import ModelPredictor, TablePredictor
from fqlab.services.dfm_service import (
    DfmError,
    FrequencyScoreMap,
    check_nesting,
    filter_dataset_with_dfm,
    load_dfms,
    run_dfm_analysis,
    score_frequencies,
    select_topx,
    shortcut_report,
    x_label,
)
from fqlab.utils.metrics import cross_entropy
from fqlab.utils.spectrum import (
    FrequencyCoord,
    FrequencyMask,
    dft2,
    idft2,
    remove_frequency_pair,
    unique_frequency_pairs,
)
from tests.conftest import make_dataset


def _score_map(side, scores):
    return FrequencyScoreMap(class_index=0, class_name="C0", side=side, scores=np.asarray(scores, dtype=np.float64), baseline=0.0)


def _table(dataset, rows):
    return TablePredictor(
        {sample_id: np.asarray(row, dtype=np.float64) for sample_id, row in zip(dataset.ids, rows)},
        n_classes=dataset.n_classes,
    )


def _wave(side, u, v, amplitude):
    m, n = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    return amplitude * np.cos(2 * np.pi * (u * m + v * n) / side)


@dataclass
class _DominantFrequencyPredictor:
    """Prediz C0 quando um único par domina a energia fora do DC; senão C1."""
    coord: Tuple[int, int]
    n_classes: int = 2
    floor: float = 1.0

    def scores(self, dataset):
        F = dft2(dataset.images[:, 0].astype(np.float64))
        side = F.shape[-1]
        power = np.abs(F) ** 2
        power[:, side // 2, side // 2] = 0.0
        coord = FrequencyCoord(*self.coord)
        (i, j), (pi, pj) = coord.index(side), coord.partner(side).index(side)
        share = (power[:, i, j] + power[:, pi, pj]) / (power.sum(axis=(1, 2)) + self.floor)
        return np.stack([10.0 * share, np.full_like(share, 5.0)], axis=1)


@dataclass
class _BatchRecordingPredictor(ModelPredictor):
    seen: List[int] = field(default_factory=list)

    def scores(self, dataset):
        self.seen.append(self.batch_size)
        return super().scores(dataset)


@pytest.mark.unit
class TestSelectTopx:
    """Testes para a seleção top-X%."""

    @pytest.mark.parametrize("x, expected", [(1, 6), (5, 26), (10, 52), (100, 514)])
    def test_cardinality(self, rng, x, expected):
        """Testar ceil(X% de 514) pares selecionados."""
        dfm = select_topx(_score_map(32, rng.random(514)), x)
        assert len(dfm.selected) == expected

    def test_full_selection(self, rng):
        """Testar X=100 → máscara toda verdadeira."""
        assert np.all(select_topx(_score_map(32, rng.random(514)), 100).bits)

    def test_nesting(self, rng):
        """Testar top-X1 ⊆ top-X2 para X1 < X2."""
        score_map = _score_map(32, rng.normal(size=514))
        per_x = {x: select_topx(score_map, x) for x in (1, 5, 10, 50)}
        check_nesting(per_x)
        assert per_x[1].pair_set() <= per_x[5].pair_set() <= per_x[50].pair_set()

    def test_highest_scores_selected(self, rng):
        """Testar que os pares selecionados têm os maiores scores."""
        scores = rng.permutation(514).astype(float)
        dfm = select_topx(_score_map(32, scores), 5)
        assert sorted(scores[dfm.selected].tolist()) == list(range(488, 514))

    def test_side_fourteen(self, rng):
        """Testar 100 pares e X=5 → 5 pares com 9 ou 10 bits."""
        pairs = unique_frequency_pairs(14)
        dfm = select_topx(_score_map(14, rng.random(100)), 5)
        assert len(dfm.selected) == 5
        n_self = int(pairs.self_paired[dfm.selected].sum())
        assert dfm.mask.count() == 10 - n_self

    def test_tie_break_prefix(self):
        """Testar empate total: DC, depois menor raio e ordem de linha; execuções idênticas."""
        score_map = _score_map(32, np.zeros(514))
        first = select_topx(score_map, 1)
        pairs = unique_frequency_pairs(32)
        coords = [pairs.coord(int(k)) for k in first.selected]
        assert coords == [
            FrequencyCoord(0, 0),
            FrequencyCoord(-1, 0),
            FrequencyCoord(0, -1),
            FrequencyCoord(-1, -1),
            FrequencyCoord(-1, 1),
            FrequencyCoord(-2, 0),
        ]
        assert np.array_equal(select_topx(score_map, 1).bits, first.bits)

    def test_invalid(self, rng):
        """Testar X fora de (0, 100] e scores com tamanho errado."""
        with pytest.raises(DfmError):
            select_topx(_score_map(32, rng.random(514)), 0)
        with pytest.raises(DfmError):
            select_topx(_score_map(32, rng.random(514)), 101)
        with pytest.raises(DfmError):
            select_topx(_score_map(32, rng.random(10)), 5)

    def test_nesting_violation_detected(self, rng):
        """Testar que DFMs não aninhados são rejeitados."""
        a = select_topx(_score_map(32, rng.random(514)), 1)
        b = select_topx(_score_map(32, -rng.random(514)), 5)
        b.selected = np.setdiff1d(b.selected, a.selected)
        with pytest.raises(DfmError):
            check_nesting({1: a, 5: b})

    def test_label(self):
        """Testar rótulos de X nos nomes de arquivo."""
        assert x_label(5.0) == "top5"
        assert x_label(2.5) == "top2.5"


@pytest.mark.unit
class TestScoreFrequencies:
    """Testes para a pontuação por remoção de pares."""

    def test_constant_predictor_scores_zero(self, rng):
        """Testar preditor que ignora a entrada → todos os scores 0."""
        dataset = make_dataset(rng.random((3, 1, 8, 8)), [1, 1, 1], class_names=["a", "b"])
        predictor = _table(dataset, [[0.2, 0.7]] * 3)
        score_map = score_frequencies(predictor, dataset)
        assert score_map.scores.shape == (34,)
        assert np.all(score_map.scores == 0.0)
        assert score_map.class_index == 1
        assert score_map.to_grid().shape == (8, 8)

    def test_absent_frequencies_score_zero(self, tiny_model):
        """Testar imagens nulas: todo par já é zero, score exatamente 0."""
        dataset = make_dataset(np.zeros((2, 1, 8, 8)), [2, 2], class_names=["C0", "C1", "C2", "C3"])
        score_map = score_frequencies(ModelPredictor(tiny_model), dataset)
        assert np.all(score_map.scores == 0.0)

    def test_score_matches_pair_removal(self, rng, tiny_model):
        """Testar o score como o aumento da perda após zerar o par e seu parceiro."""
        dataset = make_dataset(rng.random((3, 1, 8, 8)), [1, 1, 1], class_names=["C0", "C1", "C2", "C3"])
        score_map = score_frequencies(ModelPredictor(tiny_model), dataset)
        baseline = cross_entropy(forward(tiny_model, dataset.images), dataset.labels)
        assert score_map.baseline == pytest.approx(baseline, abs=1e-12)

        pairs = unique_frequency_pairs(8)
        spectrum = dft2(dataset.images)
        for k in (0, 7, len(pairs) - 1):
            removed = idft2(remove_frequency_pair(spectrum, pairs.coord(k))).astype(np.float32)
            expected = cross_entropy(forward(tiny_model, removed), dataset.labels) - baseline
            assert score_map.scores[k] == pytest.approx(expected, abs=1e-9)

    def test_workers_determinism(self, rng, tiny_model):
        """Testar que a pontuação paralela coincide com a serial."""
        dataset = make_dataset(rng.random((3, 1, 8, 8)), [0, 0, 0], class_names=["C0", "C1", "C2", "C3"])
        predictor = ModelPredictor(tiny_model)
        serial = score_frequencies(predictor, dataset, workers=1)
        parallel = score_frequencies(predictor, dataset, workers=3)
        assert np.array_equal(serial.scores, parallel.scores)
        assert np.any(serial.scores != 0.0)

    def test_errors(self, rng, tiny_model):
        """Testar conjunto vazio e mistura de classes."""
        dataset = make_dataset(rng.random((2, 1, 8, 8)), [0, 1], class_names=["C0", "C1", "C2", "C3"])
        with pytest.raises(DfmError):
            score_frequencies(ModelPredictor(tiny_model), dataset)
        with pytest.raises(DfmError):
            score_frequencies(ModelPredictor(tiny_model), dataset.subset([]))


@pytest.mark.unit
class TestFilterWithDfm:
    """Testes para a filtragem de datasets por DFM."""

    def test_all_true_and_dc_only(self, rng):
        """Testar DFM passa-tudo (identidade) e só-DC (imagens constantes)."""
        dataset = make_dataset(rng.random((3, 1, 8, 8)), [0, 1, 0])
        same = filter_dataset_with_dfm(dataset, FrequencyMask.all_pass(8))
        assert np.max(np.abs(same.images - dataset.images)) <= 1e-6
        bits = np.zeros((8, 8), dtype=bool)
        bits[4, 4] = True
        flat = filter_dataset_with_dfm(dataset, FrequencyMask(bits))
        assert np.allclose(flat.images, flat.images.mean(axis=(2, 3), keepdims=True), atol=1e-6)
        assert flat.ids == dataset.ids

    def test_shape_mismatch(self, rng):
        """Testar DFM com shape diferente das imagens."""
        with pytest.raises(DfmError):
            filter_dataset_with_dfm(make_dataset(rng.random((1, 1, 8, 8)), [0]), FrequencyMask.all_pass(16))


@pytest.mark.unit
class TestShortcutReport:
    """Testes para o relatório de atalhos."""

    def _dataset(self):
        return make_dataset(np.zeros((8, 1, 8, 8)), [0, 0, 1, 1, 2, 2, 3, 3])

    def test_constant_class_flagged(self):
        """Testar preditor que sempre escolhe C0: TPR_df = 1 e FPR_df = 1 marcam atalho só em C0."""
        dataset = self._dataset()
        predictor = _table(dataset, [[1, 0, 0, 0]] * 8)
        dfms = {c: FrequencyMask.all_pass(8) for c in range(4)}
        report = shortcut_report(predictor, dataset, dfms, 5.0)
        assert report.flagged() == ["C0"]
        assert (report.rows[0].tpr_df, report.rows[0].fpr_df) == (1.0, 1.0)
        assert report.rows[1].tpr_df == 0.0

    def test_perfect_classifier_not_flagged(self):
        """Testar TPR_df = 1 com FPR_df = 0 → sem atalho."""
        dataset = self._dataset()
        predictor = _table(dataset, [np.eye(4)[c] for c in dataset.labels])
        report = shortcut_report(predictor, dataset, {c: FrequencyMask.all_pass(8) for c in range(4)}, 5.0)
        assert report.flagged() == []
        assert all(row.tpr_df == 1.0 and row.fpr_df == 0.0 for row in report.rows)

    def test_absent_class_not_flagged(self):
        """Testar classe ausente do teste: TPR indefinido e sem atalho."""
        dataset = make_dataset(np.zeros((3, 1, 8, 8)), [0, 1, 2], class_names=["C0", "C1", "C2", "C3"])
        predictor = _table(dataset, [[0, 0, 0, 1]] * 3)
        report = shortcut_report(predictor, dataset, {c: FrequencyMask.all_pass(8) for c in range(4)}, 5.0)
        assert report.rows[3].tpr is None
        assert report.rows[3].tpr_df is None
        assert not report.rows[3].shortcut

    def test_missing_dfm_named(self):
        """Testar DFM ausente nomeando a classe."""
        dataset = self._dataset()
        predictor = _table(dataset, [[1, 0, 0, 0]] * 8)
        with pytest.raises(DfmError, match="C2"):
            shortcut_report(predictor, dataset, {0: FrequencyMask.all_pass(8), 1: FrequencyMask.all_pass(8)}, 5.0)


@pytest.mark.unit
class TestPlantedShortcut:
    """Testar pontuação, DFM e relatório com uma frequência plantada em C0."""

    SIDE = 8
    PLANTED = (1, 2)

    def _images(self, rng, n, waves):
        base = 0.5 + sum(_wave(self.SIDE, u, v, a) for u, v, a in waves)
        return base + 0.001 * rng.standard_normal((n, 1, self.SIDE, self.SIDE))

    def _testset(self, rng):
        c0 = self._images(rng, 4, [(*self.PLANTED, 0.25)])
        c1 = self._images(rng, 4, [(3, 1, 0.25), (*self.PLANTED, 0.05)])
        return make_dataset(np.concatenate([c0, c1]), [0] * 4 + [1] * 4)

    def _planted_id(self):
        u, v = self.PLANTED
        half = self.SIDE // 2
        return int(unique_frequency_pairs(self.SIDE).pair_lookup()[u + half, v + half])

    def test_planted_pair_ranked_first(self, rng):
        """Testar que o par plantado tem o maior score e entra nos DFMs de C0."""
        predictor = _DominantFrequencyPredictor(self.PLANTED)
        score_map = score_frequencies(predictor, self._testset(rng).by_class(0))

        planted = self._planted_id()
        assert int(np.argmax(score_map.scores)) == planted
        assert score_map.scores[planted] > 1.0
        assert select_topx(score_map, 2.0).selected.tolist() == [planted]
        assert planted in select_topx(score_map, 5.0).pair_set()

    def test_planted_pair_flagged_as_shortcut(self, rng):
        """Testar que o DFM de C0 leva C1 a ser predita como C0 e marca C0 como atalho."""
        testset = self._testset(rng)
        predictor = _DominantFrequencyPredictor(self.PLANTED)
        score_map = score_frequencies(predictor, testset.by_class(0))
        dfms = {0: select_topx(score_map, 2.0), 1: FrequencyMask.all_pass(self.SIDE)}

        report = shortcut_report(predictor, testset, dfms, 2.0)

        row = report.rows[0]
        assert (row.tpr, row.fpr) == (1.0, 0.0)
        assert (row.tpr_df, row.fpr_df) == (1.0, 1.0)
        assert report.flagged() == ["C0"]


@pytest.mark.integration
class TestRunDfmAnalysis:
    """Testes para a análise completa com gravação dos arquivos."""

    def test_outputs(self, tmp_path, syn_b1_small, tiny_model):
        """Testar mapas de score, DFMs por X, prévias e relatório gravados."""
        config = DfmConfig(x_grid=[1.0, 5.0], report_x=5.0, previews=True)
        run = run_dfm_analysis(ModelPredictor(tiny_model), syn_b1_small["val"], syn_b1_small["test"], config, tmp_path)

        assert len(run.score_maps) == 4
        for c, name in enumerate(["C0", "C1", "C2", "C3"]):
            assert (tmp_path / f"scores_class_{c}_{name}.f32").exists()
            for x in ("top1", "top5"):
                assert (tmp_path / f"dfm_class_{c}_{name}_{x}.f32").exists()
                assert (tmp_path / f"dfm_class_{c}_{name}_{x}.png").exists()
        assert (tmp_path / "shortcut_report.csv").exists()
        assert (tmp_path / "shortcut_report.json").exists()
        assert any((tmp_path / "previews").rglob("*.png"))
        assert [row.class_name for row in run.report.rows] == ["C0", "C1", "C2", "C3"]

        loaded = load_dfms(tmp_path, ["C0", "C1", "C2", "C3"], 5.0)
        for c in range(4):
            assert np.array_equal(loaded[c].bits, run.dfms[5.0][c].bits)
            assert loaded[c].count() >= 26

    def test_batch_size_reaches_model(self, tmp_path, rng, tiny_model):
        """Testar que o lote configurado é usado em todas as inferências do modelo."""
        dataset = make_dataset(rng.random((4, 1, 8, 8)), [0, 1, 2, 3])
        predictor = _BatchRecordingPredictor(tiny_model)
        config = DfmConfig(x_grid=[5.0], report_x=5.0, batch_size=3, previews=False)

        run = run_dfm_analysis(predictor, dataset, dataset, config, tmp_path)

        assert predictor.seen and set(predictor.seen) == {3}
        reference = run_dfm_analysis(ModelPredictor(tiny_model), dataset, dataset,
                                     DfmConfig(x_grid=[5.0], report_x=5.0, previews=False), tmp_path / "ref")
        for ours, theirs in zip(run.score_maps, reference.score_maps):
            np.testing.assert_allclose(ours.scores, theirs.scores, atol=1e-6)

    def test_load_dfms_missing_class(self, tmp_path):
        """Testar que classes sem arquivo ficam de fora do dicionário."""
        assert load_dfms(tmp_path, ["C0"], 5.0) == {}
