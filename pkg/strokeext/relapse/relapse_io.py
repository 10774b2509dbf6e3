#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : relapse_io.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 03.09.2026
# Last Modified Date: 12.10.2026

"""On-disk formats.

Volume file: three little-endian uint32 dims (x, y, z) followed by the
row-major body, float32 LE for volumes and one byte (0/1) per voxel for masks.
Tables are UTF-8 CSV with a header row, comma separated, "\\n" line endings.
"""

import os
import re
import numpy as np
import pandas as pd

from typing import Iterable, List, Optional, Sequence

from .relapse_types import ConfigHashMismatchError, FormatError, PrerequisiteError

HEADER_WORDS = 3
WORD_SIZE = 4
FLOAT_FORMAT = "%.6f"
PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def _words_to_bytes(words: Sequence[int], ws: int = WORD_SIZE) -> bytes:
    data = bytearray()
    for w in words:
        data.extend(int(w).to_bytes(ws, "little"))
    return bytes(data)


def _bytes_to_words(data: bytes, count: int, ws: int = WORD_SIZE) -> List[int]:
    if len(data) < count * ws:
        raise FormatError(f"header truncated: {len(data)} bytes, need {count * ws}")
    return [int.from_bytes(data[ws * k : ws * (k + 1)], "little") for k in range(count)]


def _write_grid(path: str, grid: np.ndarray, dtype: str) -> None:
    if grid.ndim != 3:
        raise FormatError(f"expected a 3D grid, got shape {grid.shape}")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    body = np.ascontiguousarray(grid, dtype=dtype).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_words_to_bytes(grid.shape))
        fh.write(body)


def _read_grid(path: str, dtype: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    dims = _bytes_to_words(data, HEADER_WORDS)
    itemsize = np.dtype(dtype).itemsize
    expected = int(np.prod(dims)) * itemsize
    body = data[HEADER_WORDS * WORD_SIZE :]
    if len(body) != expected:
        raise FormatError(
            f"{path}: body has {len(body)} bytes, dims {tuple(dims)} need {expected}"
        )
    return np.frombuffer(body, dtype=dtype).reshape(dims).copy()


def write_volume(path: str, volume: np.ndarray) -> None:
    _write_grid(path, volume, "<f4")


def read_volume(path: str) -> np.ndarray:
    return _read_grid(path, "<f4").astype(np.float64)


def write_mask(path: str, mask: np.ndarray) -> None:
    _write_grid(path, np.asarray(mask, dtype=bool).astype(np.uint8), "u1")


def read_mask(path: str) -> np.ndarray:
    grid = _read_grid(path, "u1")
    if grid.size and grid.max() > 1:
        raise FormatError(f"{path}: mask bytes must be 0 or 1")
    return grid.astype(bool)


def write_pgm(path: str, image: np.ndarray) -> None:
    """Binary P5 greyscale, values in [0, 1] mapped to 0..255."""
    if image.ndim != 2:
        raise FormatError(f"PGM needs a 2D image, got shape {image.shape}")
    pixels = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    height, width = pixels.shape
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes(order="C"))


def read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    # A single whitespace byte ends the header; pixel bytes may be whitespace too
    header = PGM_HEADER.match(data)
    if header is None:
        raise FormatError(f"{path}: not a binary P5 PGM")
    width, height, maxval = (int(v) for v in header.groups())
    body = data[header.end() :]
    if maxval != 255 or len(body) != width * height:
        raise FormatError(f"{path}: unsupported PGM payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width)


def write_table(
    path: str,
    rows: Iterable[dict],
    columns: Optional[Sequence[str]] = None,
    float_format: str = FLOAT_FORMAT,
) -> None:
    frame = pd.DataFrame(list(rows), columns=columns)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format=float_format, lineterminator="\n")


def read_table(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise PrerequisiteError(f"missing table {path}")
    return pd.read_csv(path, keep_default_na=True)


def write_key_values(path: str, values: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in values.items():
            if isinstance(value, float):
                value = FLOAT_FORMAT % value
            fh.write(f"{key}: {'' if value is None else value}\n")


def read_key_values(path: str) -> dict:
    if not os.path.exists(path):
        raise PrerequisiteError(f"missing file {path}")
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if ": " not in line and not line.endswith(":"):
                raise FormatError(f"{path}:{lineno}: expected 'key: value'")
            key, _, value = line.partition(":")
            out[key.strip()] = value.strip()
    return out


def hash_sidecar(path: str) -> str:
    return f"{path}.sha"


def write_hash(path: str, digest: str) -> None:
    with open(hash_sidecar(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(digest + "\n")


def check_hash(path: str, digest: str) -> None:
    """Reject an artifact produced under a different configuration."""
    sidecar = hash_sidecar(path)
    if not os.path.exists(path) or not os.path.exists(sidecar):
        raise PrerequisiteError(f"missing artifact {path} (run the producing stage first)")
    with open(sidecar, "r", encoding="utf-8") as fh:
        stored = fh.read().strip()
    if stored != digest:
        raise ConfigHashMismatchError(
            f"{path} was produced with config hash {stored}, current config hashes to "
            f"{digest}; rerun the producing stage"
        )
