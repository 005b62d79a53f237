"""
Transformadas de Fourier 2D, espectro centrado, partição em bandas e filtros de frequência.

Convenções adotadas em todo o pipeline:
- Imagens são arrays reais (..., C, H, W) com H == W (par para partição em bandas).
- Espectros são centrados: a frequência (u, v) fica no índice (u + H/2, v + W/2), com
  u, v em [-H/2, H/2) e o DC em (H/2, W/2).
- A transformada direta não é normalizada; a inversa carrega o fator 1/(H·W).
- O parceiro hermitiano de (u, v) é (-u, -v) com reflexão modular, de modo que linhas e
  colunas de Nyquist (u ou v == -H/2) são parceiras de si mesmas.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from loguru import logger

from fqlab.core.exceptions import FqlabError, UsageError
from fqlab.schemas.dataset import Band
from fqlab.utils.tensor_io import decode_tensor


HERMITIAN_TOLERANCE = 1e-6


class SpectrumError(FqlabError, ValueError):
    """Exceção para dimensões, coordenadas ou espectros inválidos."""
    pass


@dataclass(frozen=True)
class FrequencyCoord:
    """Frequência (u, v) com índices inteiros com sinal."""
    u: int
    v: int

    @property
    def r(self) -> float:
        """Raio euclidiano."""
        return math.hypot(self.u, self.v)

    def partner(self, side: int) -> "FrequencyCoord":
        """Parceiro hermitiano (-u, -v) com reflexão modular."""
        half = side // 2
        return FrequencyCoord(((-self.u + half) % side) - half, ((-self.v + half) % side) - half)

    def index(self, side: int) -> Tuple[int, int]:
        """Índice no espectro centrado."""
        return self.u + side // 2, self.v + side // 2


def _check_square(shape: Tuple[int, ...], what: str) -> Tuple[int, int]:
    if len(shape) < 2:
        raise SpectrumError(f"{what} deve ter pelo menos 2 dimensões, recebido shape {shape}")
    height, width = shape[-2], shape[-1]
    if height == 0 or width == 0:
        raise SpectrumError(f"{what} vazia: shape {shape}")
    if height != width:
        raise SpectrumError(f"{what} deve ser quadrada, recebido {height}x{width}")
    return height, width


def reflect_grid(grid: np.ndarray) -> np.ndarray:
    """Reflexão pontual pelo DC nos dois últimos eixos: out[i, j] = grid[-i mod H, -j mod W]."""
    return np.roll(np.flip(grid, axis=(-2, -1)), shift=(1, 1), axis=(-2, -1))


def dft2(image) -> np.ndarray:
    """
    Transformada de Fourier 2D centrada, por canal.

    Args:
        image: Array real (..., H, W), quadrado e finito

    Returns:
        Espectro complexo centrado com o mesmo shape
    """
    x = np.asarray(image, dtype=np.float64)
    _check_square(x.shape, "Imagem")
    if not np.all(np.isfinite(x)):
        raise SpectrumError("Imagem contém valores não finitos")
    return np.fft.fftshift(np.fft.fft2(x, axes=(-2, -1)), axes=(-2, -1))


def idft2(spectrum) -> np.ndarray:
    """
    Inversa de dft2: recupera uma imagem real a partir de um espectro centrado hermitiano.

    Raises:
        SpectrumError: Se a simetria hermitiana for violada além de 1e-6 (relativo),
            nomeando a frequência mais discrepante.
    """
    F = np.asarray(spectrum, dtype=np.complex128)
    height, width = _check_square(F.shape, "Espectro")

    scale = float(np.max(np.abs(F)))
    if scale > 0.0:
        diff = np.abs(F - np.conj(reflect_grid(F)))
        worst = int(np.argmax(diff))
        relative = float(diff.flat[worst]) / scale
        if relative > HERMITIAN_TOLERANCE:
            idx = np.unravel_index(worst, F.shape)
            u, v = idx[-2] - height // 2, idx[-1] - width // 2
            raise SpectrumError(
                f"Espectro não hermitiano: desvio relativo {relative:.3e} na frequência (u={u}, v={v})"
            )

    x = np.fft.ifft2(np.fft.ifftshift(F, axes=(-2, -1)), axes=(-2, -1))
    return np.ascontiguousarray(x.real)


@lru_cache(maxsize=16)
def frequency_grid(side: int) -> Tuple[np.ndarray, np.ndarray]:
    """Grades (U, V) de coordenadas com sinal para um espectro centrado side x side."""
    coords = np.arange(side) - side // 2
    U, V = np.meshgrid(coords, coords, indexing="ij")
    U.setflags(write=False)
    V.setflags(write=False)
    return U, V


@lru_cache(maxsize=16)
def radius_grid(side: int) -> np.ndarray:
    """Raio euclidiano de cada frequência do espectro centrado."""
    U, V = frequency_grid(side)
    r = np.sqrt((U * U + V * V).astype(np.float64))
    r.setflags(write=False)
    return r


@dataclass(frozen=True)
class BandPartition:
    """Partição do espectro em anéis euclidianos de mesma largura, B1 (mais baixa) a Bn."""
    side: int
    n_bands: int
    thresholds: Tuple[float, ...]
    labels: np.ndarray = field(repr=False, compare=False)

    def band_of(self, u: int, v: int) -> int:
        i, j = FrequencyCoord(u, v).index(self.side)
        return int(self.labels[i, j])

    def members(self, band: Union[Band, int]) -> np.ndarray:
        return self.labels == _band_index(band)

    def counts(self) -> dict:
        return {k: int(np.sum(self.labels == k)) for k in range(1, self.n_bands + 1)}


def band_partition(side: int, n_bands: int = 4) -> BandPartition:
    """
    Separar o espectro em n_bands anéis de mesma largura radial.

    A banda k contém as frequências com raio em [t_{k-1}, t_k), t_k = k·(side/2)/n_bands;
    a banda mais externa é fechada acima e inclui os cantos do espectro.
    """
    if side <= 0 or side % 2 != 0:
        raise SpectrumError(f"Lado da partição deve ser par e positivo, recebido {side}")
    if n_bands < 2:
        raise SpectrumError(f"Número de bandas deve ser pelo menos 2, recebido {n_bands}")

    width = (side / 2) / n_bands
    thresholds = tuple(k * width for k in range(1, n_bands + 1))
    labels = np.searchsorted(np.asarray(thresholds[:-1]), radius_grid(side), side="right") + 1
    labels = labels.astype(np.int8)
    labels.setflags(write=False)
    return BandPartition(side=side, n_bands=n_bands, thresholds=thresholds, labels=labels)


@dataclass(frozen=True)
class FrequencyMask:
    """Máscara binária sobre o espectro centrado (True = manter), simétrica pelo DC."""
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise SpectrumError(f"Máscara deve ser 2D, recebido shape {bits.shape}")
        _check_square(bits.shape, "Máscara")
        if not np.array_equal(bits, reflect_grid(bits)):
            raise SpectrumError("Máscara não é simétrica por reflexão pelo DC")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def symmetric(cls, bits: np.ndarray) -> "FrequencyMask":
        """Construir a máscara fechando a seleção sob reflexão (inclui os parceiros)."""
        bits = np.asarray(bits, dtype=bool)
        return cls(bits | reflect_grid(bits))

    @classmethod
    def all_pass(cls, side: int) -> "FrequencyMask":
        return cls(np.ones((side, side), dtype=bool))

    @property
    def side(self) -> int:
        return self.bits.shape[0]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        return int(self.bits.sum())

    def complement(self) -> "FrequencyMask":
        return FrequencyMask(~self.bits)


class MaskKind(str, Enum):
    """Tipos de máscara suportados por make_mask."""
    KEEP_BANDS = "keep_bands"
    BAND_STOP = "band_stop"
    LOW_PASS = "low_pass"
    HIGH_PASS = "high_pass"
    FROM_DFM = "from_dfm"


def _band_index(band: Union[Band, int, str]) -> int:
    if isinstance(band, Band):
        return band.index
    if isinstance(band, str):
        return Band(band.strip().upper()).index
    return int(band)


def make_mask(
    partition: BandPartition,
    kind: MaskKind,
    bands: Optional[Iterable[Union[Band, int, str]]] = None,
    cutoff: Optional[float] = None,
    dfm=None,
) -> FrequencyMask:
    """
    Construir uma máscara de frequência.

    Args:
        partition: Partição em bandas do espectro
        kind: Tipo da máscara
        bands: Bandas mantidas (keep_bands) ou removidas (band_stop)
        cutoff: Raio de corte (low_pass mantém r <= cutoff, high_pass mantém r > cutoff)
        dfm: Objeto com atributo `bits` (DfmMask) para from_dfm
    """
    kind = MaskKind(kind)
    labels = partition.labels

    if kind in (MaskKind.KEEP_BANDS, MaskKind.BAND_STOP):
        band_set = sorted({_band_index(b) for b in (bands or [])})
        if not band_set:
            raise SpectrumError("Conjunto de bandas vazio")
        invalid = [b for b in band_set if not 1 <= b <= partition.n_bands]
        if invalid:
            raise SpectrumError(f"Bandas fora da partição: {invalid}")
        selected = np.isin(labels, band_set)
        bits = selected if kind == MaskKind.KEEP_BANDS else ~selected
        if not bits.any():
            raise SpectrumError("Máscara sem frequências mantidas (zeraria a imagem)")
        return FrequencyMask(bits)

    if kind in (MaskKind.LOW_PASS, MaskKind.HIGH_PASS):
        if cutoff is None or not 0.0 < float(cutoff) <= partition.side / 2:
            raise SpectrumError(f"Corte deve estar em (0, {partition.side // 2}], recebido {cutoff}")
        r = radius_grid(partition.side)
        bits = r <= cutoff if kind == MaskKind.LOW_PASS else r > cutoff
        if not bits.any():
            raise SpectrumError("Máscara sem frequências mantidas (zeraria a imagem)")
        return FrequencyMask(bits)

    if dfm is None:
        raise SpectrumError("from_dfm requer um DFM")
    bits = np.asarray(dfm.bits, dtype=bool)
    if bits.shape != labels.shape:
        raise SpectrumError(f"DFM com shape {bits.shape} incompatível com a partição {labels.shape}")
    return FrequencyMask(bits)


def parse_mask_spec(partition: BandPartition, text: str) -> FrequencyMask:
    """
    Interpretar uma especificação textual de máscara.

    Formatos: `all`, `B14` (mantém B1 e B4), `keep:B1,B4`, `bandstop:B2,B3`,
    `lowpass:<raio>`, `highpass:<raio>`, `dfm:<arquivo.f32>`.
    """
    raw = (text or "").strip()
    kind, _, arg = raw.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "all" and not arg:
            return FrequencyMask.all_pass(partition.side)
        if kind.startswith("b") and not arg and len(kind) >= 2 and kind[1:].isdigit():
            return make_mask(partition, MaskKind.KEEP_BANDS, bands=[int(c) for c in kind[1:]])
        if kind in ("keep", "bandstop"):
            bands = [b for b in arg.split(",") if b.strip()]
            mask_kind = MaskKind.KEEP_BANDS if kind == "keep" else MaskKind.BAND_STOP
            return make_mask(partition, mask_kind, bands=bands)
        if kind in ("lowpass", "highpass"):
            mask_kind = MaskKind.LOW_PASS if kind == "lowpass" else MaskKind.HIGH_PASS
            return make_mask(partition, mask_kind, cutoff=float(arg))
        if kind == "dfm":
            stored = FrequencyMask(decode_tensor(arg)[0] > 0.5)
            return make_mask(partition, MaskKind.FROM_DFM, dfm=stored)
    except (ValueError, FqlabError) as e:
        raise UsageError(f"Máscara inválida '{text}': {e}") from e
    raise UsageError(
        f"Máscara inválida '{text}'. Use all, B14, keep:B1,B4, bandstop:B2,B3, lowpass:R, highpass:R ou dfm:arquivo"
    )


def remove_frequency_pair(spectrum, f: Union[FrequencyCoord, Tuple[int, int]]) -> np.ndarray:
    """
    Zerar a frequência (u, v) e seu parceiro hermitiano em todos os canais.

    DC e bins de Nyquist auto-pareados zeram apenas o próprio bin.
    """
    F = np.array(spectrum, dtype=np.complex128, copy=True)
    side, _ = _check_square(F.shape, "Espectro")
    coord = f if isinstance(f, FrequencyCoord) else FrequencyCoord(int(f[0]), int(f[1]))
    half = side // 2
    if not (-half <= coord.u < half and -half <= coord.v < half):
        raise SpectrumError(f"Frequência (u={coord.u}, v={coord.v}) fora da grade [{-half}, {half})")
    i, j = coord.index(side)
    pi, pj = coord.partner(side).index(side)
    F[..., i, j] = 0.0
    F[..., pi, pj] = 0.0
    return F


def filter_image(image, mask: FrequencyMask) -> np.ndarray:
    """Aplicar a máscara no domínio da frequência: idft2(dft2(image) ⊙ mask)."""
    x = np.asarray(image, dtype=np.float64)
    _check_square(x.shape, "Imagem")
    if x.shape[-2:] != mask.bits.shape:
        raise SpectrumError(f"Imagem {x.shape[-2:]} incompatível com máscara {mask.bits.shape}")
    return idft2(dft2(x) * mask.bits)


@dataclass(frozen=True)
class RadialPdf:
    """Distribuição Pr(r) = S/(r+1) para r = 1..R."""
    max_radius: int
    probabilities: np.ndarray = field(repr=False)
    normalizer: float

    @property
    def radii(self) -> np.ndarray:
        return np.arange(1, self.max_radius + 1)

    def prob(self, r: int) -> float:
        return float(self.probabilities[r - 1])

    def restricted(self, radii: Iterable[int]) -> Tuple[np.ndarray, np.ndarray]:
        """Restringir e renormalizar a lei aos raios dados (inteiros em 1..R)."""
        radii = np.asarray(sorted(set(int(r) for r in radii)), dtype=np.int64)
        if radii.size == 0:
            raise SpectrumError("Conjunto de raios vazio")
        if radii[0] < 1 or radii[-1] > self.max_radius:
            raise SpectrumError(f"Raios fora de 1..{self.max_radius}")
        p = self.probabilities[radii - 1]
        return radii, p / p.sum()


def radial_pdf(max_radius: int) -> RadialPdf:
    """Lei radial que prioriza baixas frequências: Pr(r) = S/(r+1), S = 1/Σ 1/(r+1)."""
    if int(max_radius) != max_radius or max_radius < 1:
        raise SpectrumError(f"Raio máximo deve ser inteiro >= 1, recebido {max_radius}")
    R = int(max_radius)
    weights = 1.0 / (np.arange(1, R + 1, dtype=np.float64) + 1.0)
    normalizer = 1.0 / math.fsum(weights)
    probabilities = normalizer * weights
    probabilities.setflags(write=False)
    return RadialPdf(max_radius=R, probabilities=probabilities, normalizer=normalizer)


@dataclass(frozen=True)
class FrequencyPairs:
    """Enumeração canônica dos pares hermitianos únicos (DC primeiro, depois ordem de linha)."""
    side: int
    indices: np.ndarray = field(repr=False)
    partners: np.ndarray = field(repr=False)
    self_paired: np.ndarray = field(repr=False)
    radius: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.indices.shape[0])

    def coord(self, k: int) -> FrequencyCoord:
        i, j = self.indices[k]
        half = self.side // 2
        return FrequencyCoord(int(i) - half, int(j) - half)

    def pair_lookup(self) -> np.ndarray:
        """Grade side x side com o índice do par de cada frequência."""
        lookup = np.empty((self.side, self.side), dtype=np.int64)
        ks = np.arange(len(self))
        lookup[self.indices[:, 0], self.indices[:, 1]] = ks
        lookup[self.partners[:, 0], self.partners[:, 1]] = ks
        return lookup


@lru_cache(maxsize=16)
def unique_frequency_pairs(side: int) -> FrequencyPairs:
    """Representantes canônicos dos pares (u, v) / (-u, -v) de um espectro side x side."""
    if side <= 0 or side % 2 != 0:
        raise SpectrumError(f"Lado deve ser par e positivo, recebido {side}")
    rows, cols = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    prow, pcol = (side - rows) % side, (side - cols) % side
    linear = rows * side + cols
    partner_linear = prow * side + pcol
    canonical = (linear <= partner_linear).ravel()

    flat = np.flatnonzero(canonical)
    dc = (side // 2) * side + side // 2
    order = np.concatenate(([dc], flat[flat != dc]))

    indices = np.stack([order // side, order % side], axis=1)
    partners = np.stack([(side - indices[:, 0]) % side, (side - indices[:, 1]) % side], axis=1)
    self_paired = np.all(indices == partners, axis=1)
    radius = radius_grid(side)[indices[:, 0], indices[:, 1]]
    for arr in (indices, partners, self_paired, radius):
        arr.setflags(write=False)
    return FrequencyPairs(side=side, indices=indices, partners=partners, self_paired=self_paired, radius=radius)


def band_energy(image, partition: BandPartition, exclude_dc: bool = False) -> np.ndarray:
    """Fração da energia espectral (|F|², somada nos canais) em cada banda."""
    F = dft2(image)
    if F.shape[-2:] != partition.labels.shape:
        raise SpectrumError("Imagem incompatível com a partição")
    power = np.abs(F) ** 2
    power = power.reshape(-1, *power.shape[-2:]).sum(axis=0)
    if exclude_dc:
        half = partition.side // 2
        power[half, half] = 0.0
    total = power.sum()
    energies = np.array([power[partition.labels == k].sum() for k in range(1, partition.n_bands + 1)])
    if total <= 0.0:
        logger.debug("Energia espectral nula; frações por banda zeradas")
        return np.zeros(partition.n_bands)
    return energies / total
