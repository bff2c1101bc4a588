"""Raster snapshots (binary PPM) of belief maps and view patches."""
from __future__ import annotations

import base64
from pathlib import Path
from typing import Iterable

import numpy as np

from .mapping import Frontier

# unknown, free, occupied
STATE_RGB = np.array([[128, 128, 128], [255, 255, 255], [30, 30, 30]], dtype=np.uint8)
FRONTIER_RGB = np.array([40, 110, 240], dtype=np.uint8)
AGENT_RGB = np.array([230, 60, 40], dtype=np.uint8)


def encode_ppm(img: np.ndarray) -> bytes:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) image")
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + img.tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P6" or parts[3] != b"255":
        raise ValueError("not a binary 8-bit PPM")
    w, h = int(parts[1]), int(parts[2])
    raw = parts[4]
    if len(raw) != w * h * 3:
        raise ValueError("PPM payload has the wrong size")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3)


def ppm_b64(img: np.ndarray) -> str:
    return base64.b64encode(encode_ppm(img)).decode("ascii")


def write_ppm(path: str | Path, img: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(img))


def _upscale(img: np.ndarray, scale: int) -> np.ndarray:
    if scale == 1:
        return img
    return np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)


def map_image(
    cells: np.ndarray,
    frontiers: Iterable[Frontier] = (),
    agent_cell: tuple[int, int] | None = None,
    scale: int = 1,
) -> np.ndarray:
    img = STATE_RGB[np.asarray(cells, dtype=np.int64)].copy()
    for f in frontiers:
        for r, c in f.cells:
            img[r, c] = FRONTIER_RGB
    if agent_cell is not None:
        img[agent_cell] = AGENT_RGB
    return _upscale(img, scale)


def patch_image(patch: np.ndarray, scale: int = 1) -> np.ndarray:
    return _upscale(STATE_RGB[np.asarray(patch, dtype=np.int64)], scale)
