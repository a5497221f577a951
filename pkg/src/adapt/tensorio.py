"""Tensor and embedding file format: JSON manifest plus f32 little-endian data.

A manifest declares {dtype:"f32le", axes:[...], dims:[...]} and either inlines
the values as a flat JSON array ("data") or points at a raw row-major binary
sidecar ("data_file", relative to the manifest). Embeddings use the same
format with a single "dim" axis; attention maps additionally validate
non-negativity on load.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .attention import AttentionTensor
from .errors import FormatError

INLINE_LIMIT = 512  # elements; larger tensors go to a binary sidecar


def save_array(path, data, axes, inline_limit: int = INLINE_LIMIT):
    """Write a manifest (and sidecar if the array is large) atomically."""
    data = np.ascontiguousarray(data, dtype="<f4")
    axes = tuple(axes)
    if data.ndim != len(axes):
        raise FormatError(f"{data.ndim}-D data with {len(axes)} axes {axes}")
    manifest = {
        "dtype": "f32le",
        "axes": list(axes),
        "dims": list(data.shape),
    }
    path = os.fspath(path)
    if data.size <= inline_limit:
        manifest["data"] = [float(x) for x in data.reshape(-1)]
    else:
        data_name = os.path.basename(path) + ".bin"
        _atomic_write_bytes(
            os.path.join(os.path.dirname(path) or ".", data_name), data.tobytes()
        )
        manifest["data_file"] = data_name
    _atomic_write_bytes(
        path,
        json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
        + b"\n",
    )


def load_array(path):
    """Read a manifest; returns (float32 ndarray, axes tuple)."""
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"cannot read tensor manifest {path}: {e}") from e
    for key in ("dtype", "axes", "dims"):
        if key not in manifest:
            raise FormatError(f"manifest {path} missing {key!r}")
    if manifest["dtype"] != "f32le":
        raise FormatError(f"unsupported dtype {manifest['dtype']!r}")
    dims = [int(d) for d in manifest["dims"]]
    count = int(np.prod(dims)) if dims else 0
    if "data" in manifest:
        flat = np.asarray(manifest["data"], dtype="<f4")
    elif "data_file" in manifest:
        data_path = os.path.join(os.path.dirname(path) or ".", manifest["data_file"])
        try:
            flat = np.fromfile(data_path, dtype="<f4")
        except OSError as e:
            raise FormatError(f"cannot read tensor data {data_path}: {e}") from e
    else:
        raise FormatError(f"manifest {path} has neither data nor data_file")
    if flat.size != count:
        raise FormatError(
            f"manifest {path} declares {count} elements, data has {flat.size}"
        )
    return flat.reshape(dims), tuple(str(a) for a in manifest["axes"])


def save_tensor(path, tensor: AttentionTensor, inline_limit: int = INLINE_LIMIT):
    save_array(path, tensor.data, tensor.axes, inline_limit=inline_limit)


def load_tensor(path) -> AttentionTensor:
    data, axes = load_array(path)
    return AttentionTensor(data=data, axes=axes)


def save_vector(path, values, inline_limit: int = INLINE_LIMIT):
    """Save a 1-D embedding using the tensor format with a 'dim' axis."""
    v = np.asarray(values, dtype=np.float32).reshape(-1)
    save_array(path, v, ("dim",), inline_limit=inline_limit)


def load_vector(path) -> np.ndarray:
    data, axes = load_array(path)
    if axes != ("dim",):
        raise FormatError(f"expected a 1-D embedding file, got axes {axes}")
    return data


def _atomic_write_bytes(path, payload: bytes):
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
