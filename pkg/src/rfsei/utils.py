"""Small shared helpers: seed derivation and atomic file output."""

from __future__ import annotations

import os
import tempfile

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """One step of the splitmix64 mixer; full-period bijection on 64-bit ints."""
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *indices: int) -> int:
    """Deterministically mix a master seed with one or more stream indices.

    Distinct index tuples map to distinct 64-bit seeds (splitmix64 is a
    bijection applied to an injective chain), which is what makes parallel
    per-frame generation reproducible and split seeds pairwise disjoint.
    """
    z = splitmix64(master_seed & _MASK64)
    for idx in indices:
        z = splitmix64(z ^ ((idx + 1) & _MASK64))
    return z


def atomic_write_bytes(path: str | os.PathLike, payload: bytes) -> None:
    """Write ``payload`` to ``path`` via a temp file + rename.

    An interrupted run can therefore never leave a partial artifact at the
    destination path.
    """
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
