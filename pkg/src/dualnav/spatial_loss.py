"""Cosine alignment loss between visual tokens and spatial features, its
gradient, sinusoidal positions, and binary passage masks.

``se_loss`` computes ``l_action + alpha * mean_t (1 - cos(V_t, S_t + P_t))``
with the cosine taken per row over the feature dimension.

Tensor files: a text header line ``dualnav-tensor <rows> <cols>``
followed by one whitespace-separated row per line (``repr`` floats, so
values round-trip exactly).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

DEFAULT_ALPHA = 0.1


class ZeroNormRow(ValueError):
    """A row of V or S + P has zero norm, so the cosine is undefined."""


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    action_term: float
    alignment_term: float
    alpha: float


def _check(V, S, P) -> tuple[np.ndarray, np.ndarray]:
    V = np.asarray(V, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] < 1 or V.shape[1] < 1:
        raise ValueError(f"token matrices must be N x D with N, D >= 1, got {V.shape}")
    if S.shape != V.shape or P.shape != V.shape:
        raise ValueError(f"shape mismatch: V {V.shape}, S {S.shape}, P {P.shape}")
    if not (np.isfinite(V).all() and np.isfinite(S).all() and np.isfinite(P).all()):
        raise ValueError("token matrices must be finite")
    U = S + P
    for name, M in (("V", V), ("S + P", U)):
        bad = np.flatnonzero(~np.any(M != 0.0, axis=1))
        if bad.size:
            raise ZeroNormRow(f"row {int(bad[0])} of {name} has zero norm")
    return V, U


def _cosines(V: np.ndarray, U: np.ndarray) -> np.ndarray:
    # one sqrt of the product: parallel rows give exactly 1.0 more often
    # than dividing by two separately rounded norms
    dot = np.einsum("ij,ij->i", V, U)
    nv2 = np.einsum("ij,ij->i", V, V)
    nu2 = np.einsum("ij,ij->i", U, U)
    c = dot / np.sqrt(nv2 * nu2)
    return np.clip(c, -1.0, 1.0)


def se_loss(V, S, P, alpha: float = DEFAULT_ALPHA, l_action: float = 0.0) -> LossBreakdown:
    V, U = _check(V, S, P)
    cos = _cosines(V, U)
    align = math.fsum(1.0 - cos) / len(cos)
    return LossBreakdown(
        total=float(l_action) + alpha * align,
        action_term=float(l_action),
        alignment_term=align,
        alpha=float(alpha),
    )


def se_loss_grad(V, S, P, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Gradient of the total loss with respect to V (the action term is constant in V)."""
    V, U = _check(V, S, P)
    n = V.shape[0]
    nv = np.sqrt(np.einsum("ij,ij->i", V, V))[:, None]
    nu = np.sqrt(np.einsum("ij,ij->i", U, U))[:, None]
    cos = _cosines(V, U)[:, None]
    return -(alpha / n) * (U / (nv * nu) - cos * V / (nv * nv))


def sinusoidal_pos(n: int, d: int) -> np.ndarray:
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    if d % 2:
        raise ValueError(f"d must be even, got {d}")
    t = np.arange(n, dtype=np.float64)[:, None]
    i = np.arange(d // 2, dtype=np.float64)[None, :]
    ang = t / np.power(10000.0, 2.0 * i / d)
    out = np.empty((n, d), dtype=np.float64)
    out[:, 0::2] = np.sin(ang)
    out[:, 1::2] = np.cos(ang)
    return out


# -- passage masks ----------------------------------------------------------


@dataclass(frozen=True)
class Rect:
    """Half-open pixel box: rows ``[top, bottom)``, cols ``[left, right)``."""

    top: int
    left: int
    bottom: int
    right: int


@dataclass(frozen=True)
class Polygon:
    """Vertices as ``(x, y)`` = (col, row); a pixel is inside if its centre is (even-odd rule)."""

    vertices: tuple[tuple[float, float], ...]


Region = Union[Rect, Polygon]


def _raster_polygon(poly: Polygon, h: int, w: int) -> np.ndarray:
    v = np.asarray(poly.vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise ValueError("polygon needs at least three (x, y) vertices")
    ys, xs = np.mgrid[0:h, 0:w]
    px = xs + 0.5
    py = ys + 0.5
    inside = np.zeros((h, w), dtype=bool)
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for a, b, c, d in zip(x0, y0, x1, y1):
        if b == d:
            continue
        crosses = (b > py) != (d > py)
        xint = a + (py - b) * (c - a) / (d - b)
        inside ^= crosses & (px < xint)
    return inside


def passage_mask_encode(regions: Sequence[Region], h: int, w: int) -> np.ndarray:
    """Union of region rasterisations as a uint8 {0, 1} mask of shape (h, w)."""
    if h < 1 or w < 1:
        raise ValueError("mask dimensions must be positive")
    mask = np.zeros((h, w), dtype=np.uint8)
    for reg in regions:
        if isinstance(reg, Rect):
            if not (0 <= reg.top <= reg.bottom <= h and 0 <= reg.left <= reg.right <= w):
                raise ValueError(f"rectangle {reg} outside a {h}x{w} frame")
            mask[reg.top:reg.bottom, reg.left:reg.right] = 1
        elif isinstance(reg, Polygon):
            v = np.asarray(reg.vertices, dtype=np.float64)
            if v.size and (v[:, 0].min() < 0 or v[:, 1].min() < 0 or v[:, 0].max() > w or v[:, 1].max() > h):
                raise ValueError(f"polygon outside a {h}x{w} frame")
            mask[_raster_polygon(reg, h, w)] = 1
        else:
            raise TypeError(f"unsupported region {reg!r}")
    return mask


def mask_to_rects(mask: np.ndarray) -> list[Rect]:
    """One 1-pixel rectangle per set pixel; re-encoding gives the same mask."""
    rows, cols = np.nonzero(mask)
    return [Rect(int(r), int(c), int(r) + 1, int(c) + 1) for r, c in zip(rows, cols)]


# -- tensor files -----------------------------------------------------------

_MAGIC = "dualnav-tensor"


def save_tensor(path: str | Path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    lines = [f"{_MAGIC} {M.shape[0]} {M.shape[1]}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_tensor(path: str | Path) -> np.ndarray:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty tensor file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != _MAGIC:
        raise ValueError(f"{path}: line 1: expected '{_MAGIC} <rows> <cols>'")
    n, d = int(head[1]), int(head[2])
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n:
        raise ValueError(f"{path}: expected {n} rows, found {len(body)}")
    out = np.empty((n, d), dtype=np.float64)
    for i, ln in enumerate(body):
        vals = ln.split()
        if len(vals) != d:
            raise ValueError(f"{path}: line {i + 2}: expected {d} values, found {len(vals)}")
        out[i] = [float(x) for x in vals]
    return out
