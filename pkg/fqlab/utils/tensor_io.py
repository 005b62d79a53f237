"""
Utilitários para o container binário de tensores (.f32).

Formato (little-endian):
    offset 0   magic b"FQL1" (4 bytes)
    offset 4   channels (uint32)
    offset 8   height   (uint32)
    offset 12  width    (uint32)
    offset 16  channels·height·width float32, channel-major, row-major
"""

import os
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from loguru import logger

from fqlab.core.exceptions import FqlabError


MAGIC = b"FQL1"
HEADER = struct.Struct("<4sIII")
HEADER_SIZE = HEADER.size
PAYLOAD_DTYPE = np.dtype("<f4")

# Assinaturas conhecidas (magic numbers) para mensagens de erro mais úteis
FILE_SIGNATURES = {
    b"\x89PNG\r\n\x1a\n": "PNG",
    b"{": "JSON",
    b"PK\x03\x04": "ZIP",
}


class TensorFormatError(FqlabError, ValueError):
    """Arquivo .f32 malformado; `offset` indica o byte onde o problema foi detectado."""

    def __init__(self, message: str, offset: int = 0, path: Union[str, os.PathLike, None] = None):
        self.offset = offset
        self.path = str(path) if path is not None else None
        location = f"{self.path} " if self.path else ""
        super().__init__(f"{location}[offset {offset}]: {message}")


def _as_chw(array) -> np.ndarray:
    tensor = np.asarray(array)
    if tensor.ndim == 2:
        tensor = tensor[None]
    if tensor.ndim != 3:
        raise TensorFormatError(f"Tensor deve ter 2 ou 3 dimensões, recebido shape {tensor.shape}")
    if not np.all(np.isfinite(tensor)):
        raise TensorFormatError("Tensor contém valores não finitos")
    return np.ascontiguousarray(tensor, dtype=PAYLOAD_DTYPE)


def encode_bytes(array) -> bytes:
    """Serializar um tensor (C, H, W) ou (H, W) para bytes."""
    tensor = _as_chw(array)
    channels, height, width = tensor.shape
    return HEADER.pack(MAGIC, channels, height, width) + tensor.tobytes(order="C")


def decode_bytes(data: bytes, path: Union[str, os.PathLike, None] = None) -> np.ndarray:
    """
    Desserializar bytes do container para um array float32 (C, H, W).

    Raises:
        TensorFormatError: Magic inválido, cabeçalho truncado ou payload de tamanho errado.
    """
    if len(data) < 4 or data[:4] != MAGIC:
        detected = next((name for sig, name in FILE_SIGNATURES.items() if data.startswith(sig)), None)
        hint = f" (parece {detected})" if detected else ""
        raise TensorFormatError(f"Magic inválido {bytes(data[:4])!r}, esperado {MAGIC!r}{hint}", offset=0, path=path)
    if len(data) < HEADER_SIZE:
        raise TensorFormatError(
            f"Cabeçalho truncado: {len(data)} de {HEADER_SIZE} bytes", offset=len(data), path=path
        )

    _, channels, height, width = HEADER.unpack_from(data, 0)
    expected = channels * height * width * PAYLOAD_DTYPE.itemsize
    actual = len(data) - HEADER_SIZE
    if actual != expected:
        raise TensorFormatError(
            f"Payload com {actual} bytes, cabeçalho declara {channels}x{height}x{width} ({expected} bytes)",
            offset=HEADER_SIZE + min(actual, expected),
            path=path,
        )
    payload = np.frombuffer(data, dtype=PAYLOAD_DTYPE, offset=HEADER_SIZE)
    return payload.reshape(channels, height, width).astype(np.float32)


def encode_tensor(array, path: Union[str, os.PathLike]) -> Path:
    """Gravar um tensor em disco no formato .f32."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_bytes(array)
    with open(path, "wb") as f:
        f.write(data)
    logger.trace(f"💾 Tensor salvo: {path} ({len(data)} bytes)")
    return path


def decode_tensor(path: Union[str, os.PathLike]) -> np.ndarray:
    """Ler um tensor .f32 do disco."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise TensorFormatError(f"Não foi possível ler o arquivo: {e}", offset=0, path=path) from e
    return decode_bytes(data, path=path)


def read_header(path: Union[str, os.PathLike]) -> Tuple[int, int, int]:
    """Ler apenas (channels, height, width) do cabeçalho."""
    with open(path, "rb") as f:
        data = f.read(HEADER_SIZE)
    if len(data) < 4 or data[:4] != MAGIC:
        raise TensorFormatError(f"Magic inválido {bytes(data[:4])!r}", offset=0, path=path)
    if len(data) < HEADER_SIZE:
        raise TensorFormatError("Cabeçalho truncado", offset=len(data), path=path)
    _, channels, height, width = HEADER.unpack(data)
    return channels, height, width
