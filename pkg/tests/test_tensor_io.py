"""Testes para o container binário .f32."""

import struct

import numpy as np
import pytest

from fqlab.utils.tensor_io import (
    HEADER_SIZE,
    MAGIC,
    TensorFormatError,
    decode_bytes,
    decode_tensor,
    encode_bytes,
    encode_tensor,
    read_header,
)


@pytest.mark.unit
class TestEncode:
    """Testes de serialização."""

    def test_layout_of_small_tensor(self):
        """Testar que um tensor 1x2x2 ocupa 32 bytes com cabeçalho little-endian."""
        data = encode_bytes(np.array([[[0.0, 0.25], [0.5, 1.0]]], dtype=np.float32))
        assert len(data) == 32
        assert data[:4] == MAGIC
        assert struct.unpack("<III", data[4:16]) == (1, 2, 2)
        assert np.frombuffer(data[16:], dtype="<f4").tolist() == [0.0, 0.25, 0.5, 1.0]

    def test_two_dimensional_promoted(self):
        """Testar que arrays 2D viram tensores de 1 canal."""
        decoded = decode_bytes(encode_bytes(np.ones((3, 3))))
        assert decoded.shape == (1, 3, 3)
        assert decoded.dtype == np.float32

    def test_rejects_invalid_arrays(self):
        """Testar rejeição de arrays 1D/4D e valores não finitos."""
        with pytest.raises(TensorFormatError):
            encode_bytes(np.zeros(4))
        with pytest.raises(TensorFormatError):
            encode_bytes(np.zeros((1, 1, 2, 2)))
        with pytest.raises(TensorFormatError):
            encode_bytes(np.array([[np.inf]]))

    def test_file_round_trip(self, tmp_path, rng):
        """Testar gravação e leitura em disco, incluindo apenas o cabeçalho."""
        tensor = rng.random((3, 4, 4)).astype(np.float32)
        path = encode_tensor(tensor, tmp_path / "nested" / "x.f32")
        assert np.array_equal(decode_tensor(path), tensor)
        assert read_header(path) == (3, 4, 4)


@pytest.mark.unit
class TestDecodeErrors:
    """Testes para arquivos malformados."""

    def test_bad_magic_with_png_hint(self):
        """Testar magic inválido no offset 0 com dica de PNG."""
        with pytest.raises(TensorFormatError) as exc_info:
            decode_bytes(b"\x89PNG\r\n\x1a\n" + bytes(24))
        assert exc_info.value.offset == 0
        assert "PNG" in str(exc_info.value)

    def test_truncated_header(self):
        """Testar cabeçalho truncado com offset no fim dos dados."""
        with pytest.raises(TensorFormatError) as exc_info:
            decode_bytes(MAGIC + b"\x01\x00\x00\x00\x02\x00")
        assert exc_info.value.offset == 10

    def test_truncated_payload(self):
        """Testar payload curto: offset 28 para 12 de 16 bytes."""
        data = encode_bytes(np.zeros((1, 2, 2)))[:-4]
        with pytest.raises(TensorFormatError) as exc_info:
            decode_bytes(data)
        assert exc_info.value.offset == HEADER_SIZE + 12

    def test_extra_payload(self):
        """Testar payload maior que o declarado."""
        with pytest.raises(TensorFormatError):
            decode_bytes(encode_bytes(np.zeros((1, 2, 2))) + b"\x00")

    def test_missing_file_names_path(self, tmp_path):
        """Testar que o caminho aparece na mensagem de erro."""
        path = tmp_path / "missing.f32"
        with pytest.raises(TensorFormatError) as exc_info:
            decode_tensor(path)
        assert str(path) in str(exc_info.value)
