"""Binary weight-file container.

Layout of a network blob, all integers little-endian::

    magic      4 bytes  b"RMNN"
    version    uint16
    activation uint8    (1 mish, 2 relu, 3 tanh)
    n_dims     uint32
    dims       uint32 * n_dims
    payload    float64 little-endian, per layer W (row-major, fan_out x fan_in) then b

Other artifacts (dynamics models, tabular solutions) reuse the same framing:
a 4-byte magic, a uint16 version, then a sequence of arrays written by
``pack_array`` (uint8 ndim, uint32 dims, row-major float64 payload).
"""

import logging
import struct
from pathlib import Path

import numpy as np

from rmppi.errors import (
    ArtifactIOError,
    BadMagicError,
    BadVersionError,
    TruncatedError,
    WeightFileError,
)
from rmppi.nn.mlp import ACTIVATIONS, ACTIVATIONS_BY_CODE, Mlp

logger = logging.getLogger(__name__)

MLP_MAGIC = b"RMNN"
MLP_VERSION = 1
FLOAT = np.dtype("<f8")


class Reader:
    """Cursor over a byte buffer that raises ``TruncatedError`` on short reads."""

    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise TruncatedError(
                f"Expected {n} bytes at offset {self.offset}, "
                f"only {len(self.data) - self.offset} left"
            )
        chunk = self.data[self.offset : self.offset + n].tobytes()
        self.offset += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(count * FLOAT.itemsize), dtype=FLOAT).astype(
            np.float64
        )

    def array(self) -> np.ndarray:
        (ndim,) = self.unpack("<B")
        dims = self.unpack(f"<{ndim}I") if ndim else ()
        return self.floats(int(np.prod(dims, dtype=np.int64))).reshape(dims)

    def expect_header(self, magic: bytes, version: int):
        found = self.take(len(magic))
        if found != magic:
            raise BadMagicError(f"Expected magic {magic!r}, found {found!r}")
        (found_version,) = self.unpack("<H")
        if found_version != version:
            raise BadVersionError(
                f"Unsupported version {found_version} for {magic!r}, expected {version}"
            )

    @property
    def exhausted(self) -> bool:
        return self.offset == len(self.data)


def header(magic: bytes, version: int) -> bytes:
    return magic + struct.pack("<H", version)


def pack_array(arr) -> bytes:
    arr = np.ascontiguousarray(arr, dtype=FLOAT)
    return (
        struct.pack("<B", arr.ndim)
        + struct.pack(f"<{arr.ndim}I", *arr.shape)
        + arr.tobytes(order="C")
    )


def mlp_serialize(net: Mlp) -> bytes:
    parts = [
        header(MLP_MAGIC, MLP_VERSION),
        struct.pack("<B", ACTIVATIONS[net.activation].code),
        struct.pack("<I", len(net.layer_dims)),
        struct.pack(f"<{len(net.layer_dims)}I", *net.layer_dims),
    ]
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype=FLOAT).tobytes(order="C"))
        parts.append(np.ascontiguousarray(b, dtype=FLOAT).tobytes(order="C"))
    return b"".join(parts)


def read_mlp(reader: Reader) -> Mlp:
    reader.expect_header(MLP_MAGIC, MLP_VERSION)
    (code,) = reader.unpack("<B")
    if code not in ACTIVATIONS_BY_CODE:
        raise WeightFileError(f"Unknown activation id {code}")
    (n_dims,) = reader.unpack("<I")
    dims = reader.unpack(f"<{n_dims}I")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(reader.floats(fan_out * fan_in).reshape(fan_out, fan_in))
        biases.append(reader.floats(fan_out))
    return Mlp(tuple(dims), weights, biases, ACTIVATIONS_BY_CODE[code].name)


def mlp_deserialize(data: bytes) -> Mlp:
    reader = Reader(data)
    net = read_mlp(reader)
    if not reader.exhausted:
        raise WeightFileError(
            f"{len(reader.data) - reader.offset} trailing bytes after network payload"
        )
    return net


def write_bytes(path: Path | str, data: bytes):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise ArtifactIOError(path, f"cannot write ({e.strerror})") from e
    logger.debug("Wrote %d bytes to %s", len(data), path)


def read_bytes(path: Path | str) -> bytes:
    path = Path(path)
    try:
        return path.read_bytes()
    except OSError as e:
        raise ArtifactIOError(path, f"cannot read ({e.strerror})") from e


def save_mlp(net: Mlp, path: Path | str):
    write_bytes(path, mlp_serialize(net))


def load_mlp(path: Path | str) -> Mlp:
    return mlp_deserialize(read_bytes(path))
