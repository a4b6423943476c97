"""Labeled frame datasets: generation, fixed-offset evaluation grids, and a
bit-exact binary serialization format.

File format (``.rfpd``): a 64-byte header (magic ``RFPD``, format version,
frame count, frame length, target code, flags), a contiguous little-endian
float32 interleaved I/Q payload, a float32 label block, and a trailing CRC32
over everything before it.  A human-readable ``.json`` sidecar mirrors the
generating spec and the train/val/test split.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import (ChecksumError, ConfigurationError, DataFormatError,
                     TruncatedFileError, VersionMismatchError)
from .signal_model import (ImpairmentParams, ModulationScheme, synthesize_frame)
from .utils import atomic_write_text, atomic_write_bytes, derive_seed

_MAGIC = b"RFPD"
_VERSION = 1
_HEADER = struct.Struct("<4sIQIBB")     # magic, version, n, frame_len, target, flags
_HEADER_SIZE = 64

TARGET_GAIN = "gain"
TARGET_PHASE = "phase"
_TARGET_CODES = {TARGET_GAIN: 0, TARGET_PHASE: 1}
_CODE_TARGETS = {v: k for k, v in _TARGET_CODES.items()}

# Range limits mirrored from ImpairmentParams invariants
_RANGE_LIMITS = {
    "alpha_range": (-0.9, 0.9),
    "theta_range": (-10.0, 10.0),
    "freq_offset_range": (-0.1, 0.1),
    "snr_db_range": (0.0, 35.0),
}


def nyquist_span_to_sps(span: tuple[float, float],
                        rolloff: float) -> tuple[float, float]:
    """Convert a sampling range given in multiples of the Nyquist rate of an
    RRC-shaped signal (bandwidth (1 + rolloff) * Rs) into samples per symbol."""
    lo, hi = span
    return (lo * (1.0 + rolloff), hi * (1.0 + rolloff))


DEFAULT_SPS_RANGE = nyquist_span_to_sps((1.2, 4.0), 0.35)


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for a labeled dataset: one modulation family, uniform draws of
    every impairment, and a deterministic master seed."""

    family: str
    orders: tuple[int, ...]
    target: str
    n_train: int
    frame_len: int
    alpha_range: tuple[float, float] = (-0.9, 0.9)
    theta_range: tuple[float, float] = (-10.0, 10.0)
    freq_offset_range: tuple[float, float] = (-0.1, 0.1)
    sps_range: tuple[float, float] = DEFAULT_SPS_RANGE
    snr_db_range: tuple[float, float] = (0.0, 25.0)
    master_seed: int = 0
    n_val: int = 0
    n_test: int = 0

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(int(o) for o in self.orders))
        for order in self.orders:
            ModulationScheme(self.family, order)   # validates family + order
        if not self.orders:
            raise ConfigurationError("orders must be non-empty")
        if self.target not in _TARGET_CODES:
            raise ConfigurationError(f"unknown target {self.target!r}")
        if self.n_train <= 0 or self.n_val < 0 or self.n_test < 0:
            raise ConfigurationError("split sizes must be positive/non-negative")
        if self.frame_len <= 0:
            raise ConfigurationError("frame_len must be positive")
        for name, (lim_lo, lim_hi) in _RANGE_LIMITS.items():
            lo, hi = getattr(self, name)
            if not (lim_lo <= lo <= hi <= lim_hi):
                raise ConfigurationError(
                    f"{name} ({lo}, {hi}) outside [{lim_lo}, {lim_hi}] or inverted")
        lo, hi = self.sps_range
        if not (1.0 < lo <= hi):
            raise ConfigurationError(f"sps_range ({lo}, {hi}) invalid")

    @property
    def n_frames(self) -> int:
        return self.n_train + self.n_val + self.n_test

    def target_range(self) -> tuple[float, float]:
        return self.alpha_range if self.target == TARGET_GAIN else self.theta_range

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        d = dict(d)
        for key in ("orders", "alpha_range", "theta_range", "freq_offset_range",
                    "sps_range", "snr_db_range"):
            d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class EvalGrid:
    """Evenly spaced target offsets with a fixed number of frames per value;
    every other impairment stays random."""

    target: str
    grid_values: tuple[float, ...]
    frames_per_value: int

    def __post_init__(self):
        if self.target not in _TARGET_CODES:
            raise ConfigurationError(f"unknown target {self.target!r}")
        object.__setattr__(self, "grid_values",
                           tuple(float(v) for v in self.grid_values))
        values = np.asarray(self.grid_values)
        if values.size < 1 or self.frames_per_value <= 0:
            raise ConfigurationError("grid needs >= 1 value and positive count")
        if values.size > 1:
            steps = np.diff(values)
            if np.any(steps <= 0):
                raise ConfigurationError("grid_values must be strictly increasing")
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise ConfigurationError("grid_values must be evenly spaced")

    @classmethod
    def evenly_spaced(cls, target: str, start: float, stop: float, step: float,
                      frames_per_value: int) -> "EvalGrid":
        n = int(round((stop - start) / step)) + 1
        values = start + step * np.arange(n)
        return cls(target=target, grid_values=tuple(values),
                   frames_per_value=frames_per_value)

    @property
    def step(self) -> float:
        if len(self.grid_values) < 2:
            return 0.0
        return self.grid_values[1] - self.grid_values[0]


@dataclass
class Dataset:
    """Frames, labels, and the split boundaries of a generated dataset.

    Loaded instances are treated as immutable; all arrays may be read-only.
    """

    frames: np.ndarray          # (n, frame_len) complex64
    labels: np.ndarray          # (n,) float32
    spec: DatasetSpec
    grid: EvalGrid | None = None

    def __len__(self) -> int:
        return self.frames.shape[0]

    def _slice(self, lo: int, hi: int):
        return self.frames[lo:hi], self.labels[lo:hi]

    @property
    def train(self):
        return self._slice(0, self.spec.n_train)

    @property
    def val(self):
        return self._slice(self.spec.n_train, self.spec.n_train + self.spec.n_val)

    @property
    def test(self):
        lo = self.spec.n_train + self.spec.n_val
        return self._slice(lo, lo + self.spec.n_test)

    def frame_seed(self, index: int) -> int:
        return derive_seed(self.spec.master_seed, index)


def _draw_params(spec: DatasetSpec, rng: np.random.Generator):
    """Uniform impairment draws in a fixed order (order matters for
    reproducibility)."""
    order = spec.orders[rng.integers(0, len(spec.orders))]
    alpha = rng.uniform(*spec.alpha_range)
    theta = rng.uniform(*spec.theta_range)
    f_off = rng.uniform(*spec.freq_offset_range)
    sps = rng.uniform(*spec.sps_range)
    snr = rng.uniform(*spec.snr_db_range)
    return order, [alpha, theta, f_off, sps, snr]


def _generate(spec: DatasetSpec, n: int, pin_target=None) -> Dataset:
    frames = np.empty((n, spec.frame_len), dtype=np.complex64)
    labels = np.empty(n, dtype=np.float32)
    target_idx = 0 if spec.target == TARGET_GAIN else 1
    for i in range(n):
        seed_i = derive_seed(spec.master_seed, i)
        rng = np.random.default_rng(seed_i)
        order, vals = _draw_params(spec, rng)
        if pin_target is not None:
            vals[target_idx] = pin_target(i)
        params = ImpairmentParams(alpha=vals[0], theta_deg=vals[1],
                                  freq_offset=vals[2], sps=vals[3],
                                  snr_db=vals[4])
        frame = synthesize_frame(ModulationScheme(spec.family, order), params,
                                 spec.frame_len, seed_i)
        frames[i] = frame.samples
        labels[i] = vals[target_idx]
    return Dataset(frames=frames, labels=labels, spec=spec)


def build_dataset(spec: DatasetSpec) -> Dataset:
    """Generate all frames of ``spec`` (train, then val, then test).

    Each frame's impairments are drawn independently and uniformly from the
    spec ranges; the label is the true value of the target offset.  Bytes are
    identical across runs for a fixed master seed.
    """
    return _generate(spec, spec.n_frames)


def build_eval_grid(spec: DatasetSpec, grid: EvalGrid) -> Dataset:
    """Generate ``frames_per_value`` frames at each exact grid offset.

    The grid must lie within the spec's training range for its target; all
    other impairments are drawn per the spec.
    """
    if grid.target != spec.target:
        raise ConfigurationError(
            f"grid target {grid.target!r} != spec target {spec.target!r}")
    lo, hi = spec.target_range()
    values = np.asarray(grid.grid_values)
    if values[0] < lo - 1e-12 or values[-1] > hi + 1e-12:
        raise ConfigurationError("grid extends outside the spec training range")
    n = len(grid.grid_values) * grid.frames_per_value
    grid_spec = DatasetSpec(**{**spec.to_dict(),
                               "n_train": n, "n_val": 0, "n_test": 0})
    ds = _generate(grid_spec, n,
                   pin_target=lambda i: values[i // grid.frames_per_value])
    ds.grid = grid
    return ds


def save_dataset(ds: Dataset, path: str | os.PathLike) -> None:
    """Serialize to ``path`` (binary) and ``path + '.json'`` (sidecar).

    Writes are atomic; rerunning an identical generation yields a payload
    with an identical CRC.
    """
    frames = np.ascontiguousarray(ds.frames, dtype=np.complex64)
    labels = np.ascontiguousarray(ds.labels, dtype=np.float32)
    n, frame_len = frames.shape
    header = _HEADER.pack(_MAGIC, _VERSION, n, frame_len,
                          _TARGET_CODES[ds.spec.target], 0)
    header = header.ljust(_HEADER_SIZE, b"\0")
    body = header + frames.view(np.float32).tobytes() + labels.tobytes()
    crc = zlib.crc32(body)
    atomic_write_bytes(path, body + struct.pack("<I", crc))

    sidecar = {"format": "rfpd", "version": _VERSION,
               "spec": ds.spec.to_dict(),
               "grid": asdict(ds.grid) if ds.grid is not None else None}
    atomic_write_text(str(path) + ".json", json.dumps(sidecar, indent=2))


def load_dataset(path: str | os.PathLike) -> Dataset:
    """Load a dataset written by :func:`save_dataset`.

    Raises :class:`TruncatedFileError`, :class:`VersionMismatchError` or
    :class:`ChecksumError` for the corresponding corruptions.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER_SIZE + 4:
        raise TruncatedFileError(f"{path}: file shorter than header")
    magic, version, n, frame_len, target_code, _flags = _HEADER.unpack(
        blob[:_HEADER.size])
    if magic != _MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise VersionMismatchError(f"{path}: version {version} != {_VERSION}")
    expected = _HEADER_SIZE + n * frame_len * 8 + n * 4 + 4
    if len(blob) < expected:
        raise TruncatedFileError(
            f"{path}: {len(blob)} bytes, header promises {expected}")
    if len(blob) > expected:
        raise DataFormatError(f"{path}: {len(blob) - expected} trailing bytes")
    stored_crc, = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise ChecksumError(f"{path}: CRC mismatch")

    off = _HEADER_SIZE
    frames = np.frombuffer(blob, dtype=np.complex64, count=n * frame_len,
                           offset=off).reshape(n, frame_len)
    off += n * frame_len * 8
    labels = np.frombuffer(blob, dtype=np.float32, count=n, offset=off)

    sidecar_path = str(path) + ".json"
    if not os.path.exists(sidecar_path):
        raise DataFormatError(f"{path}: missing sidecar {sidecar_path}")
    with open(sidecar_path, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    spec = DatasetSpec.from_dict(sidecar["spec"])
    if spec.target != _CODE_TARGETS[target_code] or spec.n_frames != n \
            or spec.frame_len != frame_len:
        raise DataFormatError(f"{path}: sidecar disagrees with binary header")
    grid = None
    if sidecar.get("grid") is not None:
        g = sidecar["grid"]
        grid = EvalGrid(target=g["target"],
                        grid_values=tuple(g["grid_values"]),
                        frames_per_value=g["frames_per_value"])
    return Dataset(frames=frames, labels=labels, spec=spec, grid=grid)
