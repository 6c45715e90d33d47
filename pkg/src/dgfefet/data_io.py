"""File formats: MNIST IDX input, binary checkpoints, CSV export.

Checkpoint layout (all integers little-endian)::

    magic      8 bytes   b"DGFFCKPT"
    version    u32       CHECKPOINT_VERSION
    hdr_len    u32       length of the JSON header in bytes
    header     hdr_len   UTF-8 JSON: shapes, dtypes, seed, config hash,
                         body length and SHA-256 of the body
    body       ...       weights (f64, C order), fault mask (u8), col_vbg (f64),
                         theta (f64)

Floats are stored as raw IEEE-754 doubles so a round trip is bit exact.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import ChecksumError, DimensionError, ParseError, VersionError

__all__ = [
    "IdxDataset",
    "load_idx",
    "write_idx",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "write_csv",
    "read_csv",
    "atomic_write",
    "format_value",
]

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass
class IdxDataset:
    images: np.ndarray  # (count, rows, cols) uint8
    labels: np.ndarray  # (count,) uint8

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise DimensionError("image and label counts differ")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, start: int, stop: int) -> "IdxDataset":
        return IdxDataset(self.images[start:stop], self.labels[start:stop])


def _read_idx(raw: bytes, magic: int, ndim: int, what: str) -> np.ndarray:
    if len(raw) < 4:
        raise ParseError(f"{what}: file too short for magic number", 0)
    (got,) = struct.unpack_from(">I", raw, 0)
    if got != magic:
        raise ParseError(f"{what}: bad magic 0x{got:08x}, expected 0x{magic:08x}", 0)
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise ParseError(f"{what}: truncated dimension header", len(raw))
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    expected = header_end + int(np.prod(dims, dtype=np.int64))
    if len(raw) != expected:
        off = min(len(raw), expected)
        raise ParseError(f"{what}: body is {len(raw) - header_end} bytes, header implies {expected - header_end}", off)
    return np.frombuffer(raw, dtype=np.uint8, offset=header_end).reshape(dims)


def load_idx(images_path, labels_path) -> IdxDataset:
    """Parse a big-endian IDX image file (rank 3) and its label file (rank 1)."""
    images = _read_idx(Path(images_path).read_bytes(), IMAGES_MAGIC, 3, "images")
    labels = _read_idx(Path(labels_path).read_bytes(), LABELS_MAGIC, 1, "labels")
    if images.shape[0] != labels.shape[0]:
        raise ParseError(f"image count {images.shape[0]} != label count {labels.shape[0]}", 4)
    return IdxDataset(images, labels)


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    Path(images_path).write_bytes(struct.pack(">4I", IMAGES_MAGIC, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", LABELS_MAGIC, labels.shape[0]) + labels.tobytes())


def find_mnist(directory) -> tuple[IdxDataset, IdxDataset]:
    """Load the standard four MNIST files from ``directory`` (train, test)."""
    d = Path(directory)
    train = load_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte")
    test = load_idx(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte")
    return train, test


# -- checkpoints -----------------------------------------------------------

CHECKPOINT_MAGIC = b"DGFFCKPT"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    weights: np.ndarray
    faults: np.ndarray
    col_vbg: np.ndarray
    theta: np.ndarray
    seed: int
    config_hash: str
    version: int = CHECKPOINT_VERSION

    @property
    def dims(self) -> tuple[int, int]:
        return tuple(self.weights.shape)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.config_hash == other.config_hash
            and self.version == other.version
            and all(
                a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
                for a, b in zip(self._arrays(), other._arrays())
            )
        )

    def _arrays(self):
        return (
            np.ascontiguousarray(self.weights, dtype="<f8"),
            np.ascontiguousarray(self.faults, dtype=np.uint8),
            np.ascontiguousarray(self.col_vbg, dtype="<f8"),
            np.ascontiguousarray(self.theta, dtype="<f8"),
        )

    @classmethod
    def from_topology(cls, topology, seed: int, config_hash: str) -> "Checkpoint":
        a = topology.array
        return cls(a.w.copy(), a.faults.copy(), a.col_vbg.copy(), topology.theta.copy(), seed, config_hash)


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    w, f, v, th = ckpt._arrays()
    n_rows, n_cols = w.shape
    if f.shape != w.shape or v.shape != (n_cols,) or th.shape != (n_cols,):
        raise DimensionError("checkpoint arrays have inconsistent shapes")
    body = w.tobytes() + f.tobytes() + v.tobytes() + th.tobytes()
    header = {
        "version": ckpt.version,
        "dims": [n_rows, n_cols],
        "seed": int(ckpt.seed),
        "config_hash": ckpt.config_hash,
        "body_bytes": len(body),
        "sha256": hashlib.sha256(body).hexdigest(),
    }
    hdr = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return CHECKPOINT_MAGIC + struct.pack("<II", ckpt.version, len(hdr)) + hdr + body


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    atomic_write(path, checkpoint_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ParseError("not a checkpoint file", 0)
    if len(raw) < 16:
        raise ParseError("truncated checkpoint preamble", len(raw))
    version, hdr_len = struct.unpack_from("<II", raw, 8)
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"checkpoint version {version} not supported (expected {CHECKPOINT_VERSION})")
    try:
        header = json.loads(raw[16 : 16 + hdr_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChecksumError(f"corrupt checkpoint header: {exc}") from None
    body = raw[16 + hdr_len :]
    if len(body) != header.get("body_bytes") or hashlib.sha256(body).hexdigest() != header.get("sha256"):
        raise ChecksumError("checkpoint body does not match its checksum")
    n_rows, n_cols = header["dims"]
    n = n_rows * n_cols
    off = 0
    w = np.frombuffer(body, "<f8", n, off).reshape(n_rows, n_cols).astype(float)
    off += 8 * n
    faults = np.frombuffer(body, np.uint8, n, off).reshape(n_rows, n_cols).astype(bool)
    off += n
    col_vbg = np.frombuffer(body, "<f8", n_cols, off).astype(float)
    off += 8 * n_cols
    theta = np.frombuffer(body, "<f8", n_cols, off).astype(float)
    return Checkpoint(w, faults, col_vbg, theta, header["seed"], header["config_hash"], version)


# -- CSV -------------------------------------------------------------------


def format_value(value) -> str:
    """Integers verbatim, floats with 9 significant digits, everything else str()."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value == 0.0:
            return "0"
        return format(value, ".9g")
    return str(value)


def write_csv(stream: IO[str], schema: Sequence[str], rows: Iterable[Sequence]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(schema)
    for n, row in enumerate(rows):
        row = list(row)
        if len(row) != len(schema):
            raise DimensionError(f"row {n} has {len(row)} fields, schema has {len(schema)}")
        writer.writerow([format_value(v) for v in row])


def read_csv(stream: IO[str]) -> tuple[list[str], list[list[str]]]:
    reader = csv.reader(stream)
    header = next(reader)
    return header, [row for row in reader]


def csv_text(schema: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    write_csv(buf, schema, rows)
    return buf.getvalue()


def atomic_write(path, data: bytes | str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
