"""Minimal PGM (P2 ASCII / P5 binary, 8-bit) reader and writer."""
from __future__ import annotations

import os

import numpy as np

__all__ = ["PGMError", "read_pgm", "write_pgm"]


class PGMError(ValueError):
    pass


def _tokens(data: bytes, start: int, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    i = start
    n = len(data)
    while len(out) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise PGMError("truncated PGM header")
        out.append(data[i:j])
        i = j
    return out, i


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a PGM file as a float grid scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PGMError(f"{path}: not a P2/P5 PGM file")
    (w, h, maxval), pos = _tokens(data, 2, 3)
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval < 256:
        raise PGMError(f"{path}: only 8-bit PGM is supported (maxval={maxval})")
    if magic == b"P5":
        pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos + 1)
    else:
        vals, _ = _tokens(data, pos, w * h)
        pixels = np.array([int(v) for v in vals])
    return pixels.reshape(h, w).astype(np.float64) / maxval


def write_pgm(path: str | os.PathLike, grid, binary: bool = True) -> None:
    """Write a 2-D grid to 8-bit PGM, clamping to [0, 1] first."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise PGMError(f"PGM output needs a 2-D grid, got shape {grid.shape}")
    pixels = np.round(np.clip(grid, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n255\n".encode("ascii"))
            for row in pixels:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode("ascii"))
