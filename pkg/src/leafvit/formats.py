"""Binary feature (VITF) and tensor (VITL) containers, atomic writes, key=value configs.

All integers and reals on disk are little-endian; reals are float32. Values
are widened to float64 on read.
"""
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, ParseError

VITF_MAGIC = b"VITF"
VITL_MAGIC = b"VITL"
VERSION = 1


@dataclass
class FeatureSet:
    features: np.ndarray  # (n, dim)
    labels: np.ndarray  # (n,)
    class_names: tuple

    @property
    def dim(self):
        return self.features.shape[1]


def atomic_write(path, data):
    """Write bytes via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _name_bytes(name):
    raw = name.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise DataError(f"name too long: {name[:40]!r}...")
    return struct.pack("<H", len(raw)) + raw


class _Reader:
    def __init__(self, data, what):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, n, field):
        if self.pos + n > len(self.data):
            raise ParseError(f"{self.what}: truncated while reading {field}", self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, field):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), field))

    def name(self, field):
        (n,) = self.unpack("<H", field + " length")
        start = self.pos
        try:
            return self.take(n, field).decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError(f"{self.what}: {field} is not valid UTF-8", start) from None


def encode_vitf(fs):
    features = np.asarray(fs.features)
    labels = np.asarray(fs.labels, dtype=np.int64)
    n, dim = features.shape
    k = len(fs.class_names)
    if len(labels) != n:
        raise DataError(f"{n} feature rows but {len(labels)} labels")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise DataError(f"labels must lie in [0, {k})")
    parts = [VITF_MAGIC, struct.pack("<IIII", VERSION, n, dim, k)]
    parts.extend(_name_bytes(name) for name in fs.class_names)
    rec = np.zeros(n, dtype=[("label", "<u4"), ("values", "<f4", (dim,))])
    rec["label"] = labels
    rec["values"] = features
    parts.append(rec.tobytes())
    return b"".join(parts)


def decode_vitf(data):
    r = _Reader(bytes(data), "VITF")
    if r.take(4, "magic") != VITF_MAGIC:
        raise ParseError("not a VITF file (bad magic)", 0)
    version, n, dim, k = r.unpack("<IIII", "header")
    if version != VERSION:
        raise ParseError(f"unsupported VITF version {version}", 4)
    names = tuple(r.name("class name") for _ in range(k))
    need = n * (4 + 4 * dim)
    if len(r.data) - r.pos != need:
        raise ParseError(
            f"VITF: record section is {len(r.data) - r.pos} bytes, header implies {need}", r.pos
        )
    rec = np.frombuffer(r.data, dtype=[("label", "<u4"), ("values", "<f4", (dim,))], count=n, offset=r.pos)
    labels = rec["label"].astype(np.int64)
    if n and labels.max() >= k:
        bad = int(np.argmax(labels >= k))
        raise ParseError(f"VITF: label {labels[bad]} >= class count {k}", r.pos + bad * (4 + 4 * dim))
    return FeatureSet(rec["values"].astype(np.float64).reshape(n, dim), labels, names)


def encode_vitl(tensors):
    parts = [VITL_MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        parts.append(_name_bytes(name))
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_vitl(data):
    r = _Reader(bytes(data), "VITL")
    if r.take(4, "magic") != VITL_MAGIC:
        raise ParseError("not a VITL file (bad magic)", 0)
    version, count = r.unpack("<II", "header")
    if version != VERSION:
        raise ParseError(f"unsupported VITL version {version}", 4)
    tensors = {}
    for _ in range(count):
        start = r.pos
        name = r.name("tensor name")
        if name in tensors:
            raise ParseError(f"VITL: duplicate tensor name {name!r}", start)
        (rank,) = r.unpack("<B", "rank")
        dims = r.unpack(f"<{rank}I", "dims")
        size = int(np.prod(dims, dtype=np.int64))
        payload = r.take(4 * size, f"payload of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(dims)
    if r.pos != len(r.data):
        raise ParseError("VITL: trailing bytes after last tensor", r.pos)
    return tensors


def write_vitf(path, fs):
    atomic_write(path, encode_vitf(fs))


def read_vitf(path):
    with open(path, "rb") as fh:
        return decode_vitf(fh.read())


def write_vitl(path, tensors):
    atomic_write(path, encode_vitl(tensors))


def read_vitl(path):
    with open(path, "rb") as fh:
        return decode_vitl(fh.read())


def parse_key_values(text, allowed):
    """Parse ``key=value`` lines; ``#`` starts a comment. Unknown keys fail with their line number."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = (value, lineno)
    return out
