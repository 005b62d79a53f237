"""
Geração dos datasets sintéticos Syn_b com viés de frequência por classe.

Cada imagem é sintetizada diretamente no domínio da frequência:
1. sorteia K ∈ [k_min, k_max] pares de frequências nas bandas permitidas da classe, com o raio
   sorteado pela lei Pr(r) ∝ 1/(r+1) restrita aos raios disponíveis;
2. atribui amplitude U[a, b]/(r+1) e fase U[0, 2π) com o parceiro hermitiano conjugado;
3. embute o padrão especial na classe C0 e o zera nas demais;
4. aplica a transformada inversa e normaliza a imagem para [0, 1] (min-max).

Cada amostra usa um gerador independente derivado de (seed, split, classe, índice), de modo que
a geração paralela e a serial produzem exatamente o mesmo resultado.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from loguru import logger

from fqlab.core.exceptions import FqlabError
from fqlab.schemas.dataset import (
    ALL_BANDS,
    Band,
    DatasetManifest,
    GenerationConfig,
    SPLITS,
    SyntheticDatasetSpec,
)
from fqlab.utils.dataset_io import (
    LabeledDataset,
    class_dir_name,
    ensure_output_dir,
    write_manifest,
    write_split,
)
from fqlab.utils.spectrum import (
    band_energy,
    band_partition,
    idft2,
    radial_pdf,
    unique_frequency_pairs,
)


SPLIT_CODES = {"train": 0, "val": 1, "test": 2}


class SyntheticDataError(FqlabError, ValueError):
    """Exceção para especificações ou parâmetros de geração inválidos."""
    pass


def build_spec(band: Union[Band, str]) -> SyntheticDatasetSpec:
    """
    Montar o desenho do dataset Syn_b.

    C0 e C1 usam B∖{b}, C2 usa todas as bandas e C3 apenas b; o padrão especial pertence a C0.
    """
    try:
        b = Band(band.upper() if isinstance(band, str) else band)
    except ValueError as e:
        valid = ", ".join(item.value for item in ALL_BANDS)
        raise SyntheticDataError(f"Banda inválida '{band}'. Use: {valid}") from e
    others = [item for item in ALL_BANDS if item != b]
    return SyntheticDatasetSpec(
        bias_band=b,
        class_bands={0: list(others), 1: list(others), 2: list(ALL_BANDS), 3: [b]},
    )


@dataclass(frozen=True)
class _ClassPlan:
    """Candidatos de sorteio de uma classe (pares canônicos e seus raios arredondados)."""
    pair_ids: np.ndarray
    rounded_radius: np.ndarray


class SyntheticGenerator:
    """Gerador de amostras para um dataset Syn_b."""

    def __init__(self, spec: SyntheticDatasetSpec, config: Optional[GenerationConfig] = None):
        self.spec = spec
        self.config = config or GenerationConfig()
        self.side = spec.side
        self.partition = band_partition(spec.side, len(ALL_BANDS))
        self.pairs = unique_frequency_pairs(spec.side)

        rounded = np.rint(self.pairs.radius).astype(np.int64)
        self.pdf = radial_pdf(int(rounded.max()))

        half = self.side // 2
        lookup = self.pairs.pair_lookup()
        self.special_pairs = np.array(
            sorted({int(lookup[u + half, v + half]) for u, v in spec.special_pattern}), dtype=np.int64
        )
        self._plans = {c: self._build_plan(c, rounded) for c in range(spec.n_classes)}

    def _build_plan(self, class_index: int, rounded: np.ndarray) -> _ClassPlan:
        allowed = [band.index for band in self.spec.class_bands[class_index]]
        rows, cols = self.pairs.indices[:, 0], self.pairs.indices[:, 1]
        in_band = np.isin(self.partition.labels[rows, cols], allowed)
        candidate = in_band & ~self.pairs.self_paired
        candidate[self.special_pairs] = False
        pair_ids = np.flatnonzero(candidate)
        if pair_ids.size == 0:
            raise SyntheticDataError(f"Classe {class_index} sem frequências disponíveis")
        return _ClassPlan(pair_ids=pair_ids, rounded_radius=rounded[pair_ids])

    def _check_class(self, class_index: int) -> None:
        if not 0 <= class_index < self.spec.n_classes:
            raise SyntheticDataError(f"Classe {class_index} fora de 0..{self.spec.n_classes - 1}")

    def sample_rng(self, split: str, class_index: int, index: int) -> np.random.Generator:
        """Gerador independente para a amostra (seed, split, classe, índice)."""
        return np.random.default_rng(
            np.random.SeedSequence([self.config.seed, SPLIT_CODES[split], class_index, index])
        )

    def synthesize_spectrum(self, class_index: int, rng: np.random.Generator) -> np.ndarray:
        """Espectro centrado (1, H, W) de uma amostra, antes da inversa e da normalização."""
        self._check_class(class_index)
        plan = self._plans[class_index]
        cfg = self.config

        k = int(rng.integers(cfg.k_min, cfg.k_max + 1))
        k = min(k, plan.pair_ids.size)

        available = np.ones(plan.pair_ids.size, dtype=bool)
        chosen = []
        for _ in range(k):
            radii, probs = self.pdf.restricted(np.unique(plan.rounded_radius[available]))
            r = radii[rng.choice(radii.size, p=probs)]
            pool = np.flatnonzero(available & (plan.rounded_radius == r))
            pick = pool[rng.integers(pool.size)]
            available[pick] = False
            chosen.append(plan.pair_ids[pick])

        F = np.zeros((self.side, self.side), dtype=np.complex128)
        for pair_id in chosen:
            i, j = self.pairs.indices[pair_id]
            pi, pj = self.pairs.partners[pair_id]
            radius = self.pairs.radius[pair_id]
            amplitude = rng.uniform(cfg.amplitude_low, cfg.amplitude_high) / (radius + 1.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            value = amplitude * np.exp(1j * phase)
            F[i, j] = value
            F[pi, pj] = np.conj(value)

        half = self.side // 2
        for u, v in self.spec.special_pattern:
            i, j, pi, pj = u + half, v + half, -u + half, -v + half
            if class_index == self.spec.special_class:
                F[i, j] = F[pi, pj] = 1.0 / (u + 1.0)
            else:
                F[i, j] = F[pi, pj] = 0.0

        return F[None]

    def sample_class_image(self, class_index: int, rng: np.random.Generator) -> np.ndarray:
        """Imagem (1, H, W) em [0, 1] de uma amostra da classe."""
        x = idft2(self.synthesize_spectrum(class_index, rng))
        lo, hi = float(x.min()), float(x.max())
        if hi - lo <= 0.0:
            logger.warning(f"⚠️ Amostra constante na classe {class_index}; usando imagem 0.5")
            return np.full_like(x, 0.5)
        return (x - lo) / (hi - lo)

    def _sample(self, task) -> np.ndarray:
        split, class_index, index = task
        return self.sample_class_image(class_index, self.sample_rng(split, class_index, index))

    def generate_split(self, split: str, workers: int = 1) -> LabeledDataset:
        """Gerar um split balanceado (classes em ordem, n amostras por classe)."""
        if split not in SPLIT_CODES:
            raise SyntheticDataError(f"Split inválido '{split}'. Use: {', '.join(SPLITS)}")
        per_class = self.config.per_split()[split]
        tasks = [(split, c, i) for c in range(self.spec.n_classes) for i in range(per_class)]

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                images = list(pool.map(self._sample, tasks))
        else:
            images = [self._sample(task) for task in tasks]

        names = self.spec.class_names
        return LabeledDataset(
            images=np.stack(images).astype(np.float32),
            labels=np.array([c for _, c, _ in tasks], dtype=np.int64),
            ids=[f"{class_dir_name(c, names[c])}/{i:05d}" for _, c, i in tasks],
            class_names=list(names),
            split=split,
            provenance={"spec": self.spec.name, "seed": self.config.seed},
        )


def sample_class_image(
    spec: SyntheticDatasetSpec,
    class_index: int,
    rng: np.random.Generator,
    config: Optional[GenerationConfig] = None,
) -> np.ndarray:
    """Atalho funcional para SyntheticGenerator.sample_class_image."""
    return SyntheticGenerator(spec, config).sample_class_image(class_index, rng)


def synthesize_spectrum(
    spec: SyntheticDatasetSpec,
    class_index: int,
    rng: np.random.Generator,
    config: Optional[GenerationConfig] = None,
) -> np.ndarray:
    """Atalho funcional para SyntheticGenerator.synthesize_spectrum."""
    return SyntheticGenerator(spec, config).synthesize_spectrum(class_index, rng)


def _band_summary(dataset: LabeledDataset, generator: SyntheticGenerator) -> Dict[str, list]:
    """Fração média de energia por banda (sem DC) de cada classe."""
    summary = {}
    for c, name in enumerate(dataset.class_names):
        images = dataset.images[dataset.labels == c]
        fractions = np.mean([band_energy(x, generator.partition, exclude_dc=True) for x in images], axis=0)
        summary[name] = [round(float(f), 6) for f in fractions]
    return summary


def generate_dataset(
    spec: SyntheticDatasetSpec,
    config: GenerationConfig,
    out_dir: Union[str, os.PathLike, None] = None,
    overwrite: bool = False,
    workers: int = 1,
    previews: bool = True,
) -> Dict[str, LabeledDataset]:
    """
    Gerar os splits train/val/test e, se out_dir for dado, gravar o DatasetLayout.

    O resultado é função pura de (spec, config).
    """
    generator = SyntheticGenerator(spec, config)
    root: Optional[Path] = ensure_output_dir(out_dir, overwrite=overwrite) if out_dir is not None else None

    logger.info(f"🚀 Gerando {spec.name} (seed={config.seed}, por classe={config.per_split()})")
    datasets = {split: generator.generate_split(split, workers=workers) for split in SPLITS}

    if root is not None:
        for dataset in datasets.values():
            write_split(dataset, root, previews=previews)
        manifest = DatasetManifest(
            generator="fqlab.synthgen",
            spec=spec,
            config=config,
            seed=config.seed,
            channels=1,
            side=spec.side,
            class_names=list(spec.class_names),
            counts={
                split: dict(zip(ds.class_names, ds.class_counts().tolist())) for split, ds in datasets.items()
            },
            summary={"band_energy_train": _band_summary(datasets["train"], generator)},
        )
        write_manifest(manifest, root)
        logger.info(f"✅ {spec.name} gravado em {root}")

    return datasets
