"""Checkpoint format shared by both architectures.

A single file containing a JSON manifest followed by one concatenated
row-major float64 little-endian blob. The manifest records a format-version
integer, the architecture tag, the model configuration, and for each tensor
its name, shape, element type, and byte offset into the blob. Round-trips
are bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ParameterError
from .model import DirectParams, R2DNConfig
from .ren import RENConfig

MAGIC = b"R2DNCKPT"
FORMAT_VERSION = 1
_DTYPE = "<f8"

_CONFIG_TYPES = {"r2dn": R2DNConfig, "ren": RENConfig}


def save(path, arch: str, config, params: DirectParams):
    """Write manifest + blob; `arch` is "r2dn" or "ren"."""
    if arch not in _CONFIG_TYPES:
        raise ParameterError(f"unknown architecture tag {arch!r}")
    tensors = []
    offset = 0
    blobs = []
    for name, view in params.views().items():
        data = np.ascontiguousarray(view, dtype=np.float64)
        raw = data.astype(_DTYPE, copy=False).tobytes()
        tensors.append(
            {"name": name, "shape": list(data.shape), "dtype": _DTYPE, "offset": offset}
        )
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "arch": arch,
        "config": config.to_dict(),
        "tensors": tensors,
    }
    header = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(b"".join(blobs))


def load(path):
    """Read a checkpoint; returns (arch, config, DirectParams)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ParameterError(f"{path} is not a checkpoint file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(hlen).decode("utf-8"))
        blob = fh.read()
    if manifest["format_version"] != FORMAT_VERSION:
        raise ParameterError(
            f"unsupported checkpoint format version {manifest['format_version']}"
        )
    arch = manifest["arch"]
    config = _CONFIG_TYPES[arch].from_dict(manifest["config"])
    views = {}
    specs = []
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        start = entry["offset"]
        arr = np.frombuffer(
            blob, dtype=entry["dtype"], count=count, offset=start
        ).reshape(shape)
        views[entry["name"]] = arr
        specs.append((entry["name"], shape))
    return arch, config, DirectParams.from_views(views, specs)
