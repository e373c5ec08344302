"""FMAP v1 binary container for FeatureMap values.

Layout (little-endian, no padding, no checksum)::

    magic   4s   b"FMAP"
    version u32  1
    dtype   u32  1 = float32
    dims    4xu64 (B, C, H, W)
    payload B*C*H*W float32, row-major
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from mel_refine.core.tensor import FeatureMap
from mel_refine.utils.exceptions import (
    BadMagicError,
    DimOverflowError,
    FmapFormatError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)
from mel_refine.utils.logger import Logger

logger = Logger.get_logger(__name__)

MAGIC = b"FMAP"
VERSION = 1
DTYPE_FLOAT32 = 1
HEADER = struct.Struct("<4sII4Q")
# element count above which offsets no longer fit a signed 64-bit byte count
MAX_ELEMENTS = (2 ** 63 - 1 - HEADER.size) // 4

PathLike = Union[str, Path]


def encode_fmap(x: FeatureMap) -> bytes:
    header = HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT32, *x.dims)
    return header + x.data.astype("<f4").tobytes(order="C")


def decode_fmap(raw: bytes) -> FeatureMap:
    if len(raw) < len(MAGIC) or raw[: len(MAGIC)] != MAGIC:
        raise BadMagicError("bad magic: not an FMAP file")
    if len(raw) < HEADER.size:
        raise TruncatedPayloadError(
            f"truncated header: {len(raw)} bytes, need {HEADER.size}"
        )
    _, version, dtype, *dims = HEADER.unpack_from(raw)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported FMAP version {version}")
    if dtype != DTYPE_FLOAT32:
        raise UnsupportedDtypeError(f"unsupported FMAP dtype {dtype}")

    count = 1
    for d in dims:
        if d == 0:
            raise DimOverflowError(f"dimension out of range in {tuple(dims)}")
        count *= d
        if count > MAX_ELEMENTS:
            raise DimOverflowError(f"dimensions {tuple(dims)} overflow the addressable size")

    expected = HEADER.size + 4 * count
    if len(raw) < expected:
        raise TruncatedPayloadError(
            f"truncated payload: {len(raw) - HEADER.size} bytes, need {4 * count}"
        )
    if len(raw) > expected:
        raise FmapFormatError(f"{len(raw) - expected} trailing bytes after payload")

    data = np.frombuffer(raw, dtype="<f4", count=count, offset=HEADER.size)
    return FeatureMap(data.reshape(tuple(int(d) for d in dims)))


def write_fmap(path: PathLike, x: FeatureMap) -> None:
    Path(path).write_bytes(encode_fmap(x))
    logger.debug(f"Wrote FMAP {path} dims={x.dims}")


def read_fmap(path: PathLike) -> FeatureMap:
    x = decode_fmap(Path(path).read_bytes())
    logger.debug(f"Read FMAP {path} dims={x.dims}")
    return x
