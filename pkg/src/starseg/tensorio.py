"""Reading and writing of on-disk artifacts: NPY v1.0 tensors and JSON sidecars.

Only NPY version 1.0 with C-order payloads and dtypes float32 / int32 / uint8
is supported.  Tensors are rank 2 (maps) or rank 3 (channel-last stacks).
Class assignments live in a ``<name>.classes.json`` sidecar mapping decimal
instance-id strings to integer class labels.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ClassOutOfRange,
    DuplicateId,
    FortranOrderUnsupported,
    IoFailure,
    MalformedHeader,
    MalformedJson,
    UnsupportedDtype,
)

_MAGIC = b"\x93NUMPY"

# dtype name -> (NPY descr, itemsize)
_DTYPES = {
    "float32": ("<f4", 4),
    "int32": ("<i4", 4),
    "uint8": ("|u1", 1),
}
_DESCR_TO_DTYPE = {descr: name for name, (descr, _) in _DTYPES.items()}
# accept the byte-order-agnostic spelling for single-byte types
_DESCR_TO_DTYPE["<u1"] = "uint8"


@dataclass
class TensorFile:
    """An in-memory tensor: shape, dtype name and raw little-endian payload."""

    shape: tuple
    dtype: str
    payload: bytes

    def validate(self):
        if self.dtype not in _DTYPES:
            raise UnsupportedDtype(f"dtype {self.dtype!r} not supported")
        if len(self.shape) not in (2, 3):
            raise MalformedHeader(f"rank {len(self.shape)} unsupported (need 2 or 3)")
        if any(int(s) <= 0 for s in self.shape):
            raise MalformedHeader(f"non-positive dimension in shape {self.shape}")
        n = int(np.prod(self.shape)) * _DTYPES[self.dtype][1]
        if len(self.payload) != n:
            raise MalformedHeader(
                f"payload has {len(self.payload)} bytes, expected {n}"
            )

    def to_array(self) -> np.ndarray:
        self.validate()
        descr = _DTYPES[self.dtype][0]
        return np.frombuffer(self.payload, dtype=np.dtype(descr)).reshape(self.shape)

    @classmethod
    def from_array(cls, a: np.ndarray) -> "TensorFile":
        name = a.dtype.name
        if name not in _DTYPES:
            raise UnsupportedDtype(f"dtype {name!r} not supported")
        a = np.ascontiguousarray(a)
        # force little-endian byte layout
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        t = cls(shape=tuple(int(s) for s in a.shape), dtype=name, payload=a.tobytes())
        t.validate()
        return t


def _build_header(t: TensorFile) -> bytes:
    shape_str = "(" + ", ".join(str(s) for s in t.shape) + ("," if len(t.shape) == 1 else "") + ")"
    descr = _DTYPES[t.dtype][0]
    head = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_str}, }}"
    # pad so that magic(6) + version(2) + hlen(2) + header is a multiple of 64
    base = 6 + 2 + 2 + len(head) + 1  # +1 for trailing newline
    pad = (64 - base % 64) % 64
    return head.encode("latin1") + b" " * pad + b"\n"


def write_tensor(path, t: TensorFile):
    """Write ``t`` to ``path`` as an NPY v1.0 file.  Validates before any I/O."""
    t.validate()
    header = _build_header(t)
    try:
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(b"\x01\x00")
            f.write(len(header).to_bytes(2, "little"))
            f.write(header)
            f.write(t.payload)
    except OSError as e:
        raise IoFailure(str(e)) from e


def read_tensor(path) -> TensorFile:
    """Parse an NPY v1.0 file.  Rejects anything outside the supported subset."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise IoFailure(str(e)) from e

    if len(raw) < 10 or raw[:6] != _MAGIC:
        raise MalformedHeader("bad magic string")
    if raw[6:8] != b"\x01\x00":
        raise MalformedHeader(f"unsupported NPY version {raw[6]}.{raw[7]}")
    hlen = int.from_bytes(raw[8:10], "little")
    if len(raw) < 10 + hlen:
        raise MalformedHeader("truncated header")
    header = raw[10:10 + hlen]
    try:
        meta = ast.literal_eval(header.decode("latin1").strip())
    except (ValueError, SyntaxError) as e:
        raise MalformedHeader(f"unparseable header dict: {e}") from e
    if not isinstance(meta, dict) or not {"descr", "fortran_order", "shape"} <= set(meta):
        raise MalformedHeader("header dict missing required keys")

    if meta["fortran_order"]:
        raise FortranOrderUnsupported("fortran_order=True not supported")
    descr = meta["descr"]
    if descr not in _DESCR_TO_DTYPE:
        raise UnsupportedDtype(f"descr {descr!r} not supported")
    shape = meta["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(s, int) for s in shape):
        raise MalformedHeader(f"bad shape entry {shape!r}")

    t = TensorFile(
        shape=tuple(shape),
        dtype=_DESCR_TO_DTYPE[descr],
        payload=raw[10 + hlen:],
    )
    t.validate()  # rejects short/overlong payloads and bad ranks
    return t


def write_array(path, a: np.ndarray):
    """Convenience wrapper: numpy array -> NPY file."""
    write_tensor(path, TensorFile.from_array(a))


def read_array(path) -> np.ndarray:
    """Convenience wrapper: NPY file -> numpy array."""
    return read_tensor(path).to_array()


# --- class assignment sidecars ---

def read_class_assignment(path, n_classes=None) -> dict:
    """Read a ``{instance id: class}`` mapping from a JSON sidecar.

    Keys must be decimal strings of positive integers, values integers in
    1..n_classes (upper bound only checked when ``n_classes`` is given).
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise IoFailure(str(e)) from e

    def _pairs(pairs):
        seen = {}
        for k, v in pairs:
            if k in seen:
                raise DuplicateId(f"instance id {k!r} appears twice")
            seen[k] = v
        return seen

    try:
        obj = json.loads(text, object_pairs_hook=_pairs)
    except json.JSONDecodeError as e:
        raise MalformedJson(str(e)) from e
    except DuplicateId:
        raise
    if not isinstance(obj, dict):
        raise MalformedJson("expected a JSON object at top level")

    out = {}
    for k, v in obj.items():
        try:
            inst = int(k)
        except (TypeError, ValueError) as e:
            raise MalformedJson(f"key {k!r} is not a decimal integer") from e
        if inst <= 0:
            raise DuplicateId(f"invalid instance id {inst} (ids start at 1; 0 is background)")
        if not isinstance(v, int) or isinstance(v, bool):
            raise MalformedJson(f"class for id {inst} is not an integer")
        if v < 1 or (n_classes is not None and v > n_classes):
            raise ClassOutOfRange(f"class {v} for id {inst} outside 1..{n_classes or '?'}")
        out[inst] = v
    return out


def write_class_assignment(path, assignment: dict):
    """Write a ``{instance id: class}`` mapping as a JSON sidecar."""
    obj = {str(int(k)): int(v) for k, v in sorted(assignment.items())}
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(obj, f, indent=0, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise IoFailure(str(e)) from e


def classes_path(label_path) -> Path:
    """Sidecar path for a given instance-map path (``x.npy`` -> ``x.classes.json``)."""
    p = Path(label_path)
    return p.with_name(p.stem + ".classes.json")
