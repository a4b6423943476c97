"""Versioned binary checkpoints for :class:`NetworkModel`.

Format (``.rfpm``): 64-byte header (magic ``RFPM``, format version, layer
count, JSON block length, blob count), a JSON block carrying the network
config, training metadata and blob manifest, the little-endian float32
weight and optimizer-state blobs in manifest order, and a trailing CRC32.
"""

from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np

from ..errors import (ChecksumError, ConfigurationError, DataFormatError,
                      TruncatedFileError, VersionMismatchError)
from ..utils import atomic_write_bytes
from .model import NetworkConfig, NetworkModel

_MAGIC = b"RFPM"
_VERSION = 1
_HEADER = struct.Struct("<4sIIQI")   # magic, version, n_layers, json_len, n_blobs
_HEADER_SIZE = 64


def _blob_iter(model: NetworkModel):
    for group_name, group in (("params", model.params),
                              ("opt_state", model.opt_state)):
        for k, entry in enumerate(group):
            for key in sorted(entry):
                yield group_name, k, key, entry[key]


def save_checkpoint(model: NetworkModel, path: str | os.PathLike) -> None:
    """Write the model to ``path`` atomically; blobs stored as float32."""
    if model.dtype != np.dtype(np.float32):
        raise ConfigurationError(
            "checkpoint format stores float32 weights; model dtype is "
            f"{model.dtype}")
    manifest = []
    blob_bytes = []
    for group, k, key, arr in _blob_iter(model):
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        manifest.append({"group": group, "layer": k, "key": key,
                         "shape": list(arr.shape)})
        blob_bytes.append(arr.tobytes())
    doc = {"config": model.config.to_dict(), "meta": model.meta,
           "dtype": "float32", "blobs": manifest}
    doc_bytes = json.dumps(doc, sort_keys=True).encode("utf-8")
    header = _HEADER.pack(_MAGIC, _VERSION, len(model.config.layers),
                          len(doc_bytes), len(manifest))
    body = header.ljust(_HEADER_SIZE, b"\0") + doc_bytes + b"".join(blob_bytes)
    atomic_write_bytes(path, body + struct.pack("<I", zlib.crc32(body)))


def load_checkpoint(path: str | os.PathLike) -> NetworkModel:
    """Load a checkpoint written by :func:`save_checkpoint` (lossless)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER_SIZE + 4:
        raise TruncatedFileError(f"{path}: file shorter than header")
    magic, version, n_layers, json_len, n_blobs = _HEADER.unpack(
        blob[:_HEADER.size])
    if magic != _MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise VersionMismatchError(f"{path}: version {version} != {_VERSION}")
    if len(blob) < _HEADER_SIZE + json_len + 4:
        raise TruncatedFileError(f"{path}: JSON block truncated")
    doc = json.loads(blob[_HEADER_SIZE:_HEADER_SIZE + json_len])
    manifest = doc["blobs"]
    if len(manifest) != n_blobs:
        raise DataFormatError(f"{path}: blob count mismatch")
    expected = (_HEADER_SIZE + json_len
                + sum(4 * int(np.prod(m["shape"])) for m in manifest) + 4)
    if len(blob) < expected:
        raise TruncatedFileError(
            f"{path}: {len(blob)} bytes, header promises {expected}")
    if len(blob) > expected:
        raise DataFormatError(f"{path}: {len(blob) - expected} trailing bytes")
    stored_crc, = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise ChecksumError(f"{path}: CRC mismatch")

    config = NetworkConfig.from_dict(doc["config"])
    if len(config.layers) != n_layers:
        raise DataFormatError(f"{path}: layer count mismatch")
    params = [{} for _ in config.layers]
    opt_state = [{} for _ in config.layers]
    groups = {"params": params, "opt_state": opt_state}
    off = _HEADER_SIZE + json_len
    for m in manifest:
        count = int(np.prod(m["shape"]))
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=off) \
            .reshape(m["shape"]).copy()
        groups[m["group"]][m["layer"]][m["key"]] = arr
        off += 4 * count
    return NetworkModel(config=config, params=params, opt_state=opt_state,
                        meta=doc["meta"], dtype=np.dtype(np.float32))
