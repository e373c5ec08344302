import struct

import numpy as np
import pytest

from mel_refine.core.fmap_io import HEADER, decode_fmap, encode_fmap, read_fmap, write_fmap
from mel_refine.core.tensor import FeatureMap
from mel_refine.utils.exceptions import (
    BadMagicError,
    DimOverflowError,
    FmapFormatError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)


def _header(version=1, dtype=1, dims=(1, 1, 2, 2)):
    return struct.pack("<4sII4Q", b"FMAP", version, dtype, *dims)


def test_layout_of_small_map():
    raw = encode_fmap(FeatureMap(np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 1, 2, 2)))
    assert len(raw) == 60
    assert HEADER.size == 44
    assert raw[:4] == b"FMAP"
    assert struct.unpack_from("<II4Q", raw, 4) == (1, 1, 1, 1, 2, 2)
    # float32 1.0, little-endian
    assert raw[44:48] == bytes([0x00, 0x00, 0x80, 0x3F])


def test_round_trip_is_bitwise(tmp_path, rng):
    x = FeatureMap(rng.standard_normal((2, 4, 16, 16)))
    path = tmp_path / "x.fmap"
    write_fmap(path, x)
    assert read_fmap(path).bitwise_equal(x)


def test_empty_file_is_bad_magic(tmp_path):
    path = tmp_path / "empty.fmap"
    path.write_bytes(b"")
    with pytest.raises(BadMagicError, match="bad magic"):
        read_fmap(path)


def test_wrong_magic():
    with pytest.raises(BadMagicError):
        decode_fmap(b"PAMF" + _header()[4:] + bytes(16))


def test_unsupported_version():
    with pytest.raises(UnsupportedVersionError):
        decode_fmap(_header(version=2) + bytes(16))


def test_unsupported_dtype():
    with pytest.raises(UnsupportedDtypeError):
        decode_fmap(_header(dtype=2) + bytes(16))


def test_truncated_header():
    with pytest.raises(TruncatedPayloadError, match="header"):
        decode_fmap(_header()[:20])


def test_truncated_payload():
    with pytest.raises(TruncatedPayloadError, match="payload"):
        decode_fmap(_header() + bytes(15))


def test_trailing_bytes():
    with pytest.raises(FmapFormatError, match="trailing"):
        decode_fmap(_header() + bytes(17))


@pytest.mark.parametrize("dims", [(1, 0, 2, 2), (2 ** 32, 2 ** 32, 2 ** 32, 1)])
def test_bad_dimensions(dims):
    with pytest.raises(DimOverflowError):
        decode_fmap(_header(dims=dims))


def test_format_errors_share_a_base():
    assert issubclass(BadMagicError, FmapFormatError)
    assert issubclass(TruncatedPayloadError, FmapFormatError)
