"""Virtual views along a path, embeddings and similarity pruning."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from .mapping import OccupancyMap
from .planner import PlannedPath
from .world import TURN_DEG, Pose

PruneMode = Literal["last_kept", "consecutive"]
DEFAULT_TAU = 0.92
DEFAULT_PATCH = 16


@dataclass(frozen=True)
class ViewConfig:
    patch_size: int = DEFAULT_PATCH

    def __post_init__(self) -> None:
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")


@dataclass(frozen=True)
class RenderedView:
    pose: Pose
    patch: np.ndarray  # (W, W) int8 of {0 unknown, 1 free, 2 occupied}


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray

    @classmethod
    def from_vector(cls, v) -> "Embedding":
        """Wrap an external encoder output, normalising to unit length."""
        v = np.asarray(v, dtype=float).ravel()
        n = np.linalg.norm(v)
        if n == 0 or not np.isfinite(n):
            raise ValueError("embedding vector must be finite and non-zero")
        return cls(v / n)


Embedder = Callable[[RenderedView], Embedding]


def snap_heading(deg: float) -> int:
    return int(math.floor(deg / TURN_DEG + 0.5)) * TURN_DEG % 360


def path_headings(nodes: Sequence[tuple[float, float]], initial_heading: int = 0) -> list[int]:
    """Heading at node j faces node j+1; the last node keeps the previous one."""
    out = []
    prev = initial_heading
    for a, b in zip(nodes, nodes[1:]):
        dx, dy = b[0] - a[0], b[1] - a[1]
        if dx != 0 or dy != 0:
            prev = snap_heading(math.degrees(math.atan2(dy, dx)))
        out.append(prev)
    out.append(prev)
    return out[: len(nodes)]


def sample_patch(belief: OccupancyMap, pose: Pose, size: int = DEFAULT_PATCH) -> np.ndarray:
    """Nearest-cell window in the pose frame.

    Patch column j runs forward, row i runs to the agent's left, both
    centred on the pose. Cells outside the map read as unknown.
    """
    return sample_patches(belief, [pose], size)[0]


def sample_patches(belief: OccupancyMap, poses: Sequence[Pose], size: int = DEFAULT_PATCH) -> np.ndarray:
    """Batched :func:`sample_patch`; returns an (n, size, size) array."""
    n = len(poses)
    half = (size - 1) / 2.0
    idx = np.arange(size) - half
    left, fwd = np.meshgrid(idx, idx, indexing="ij")
    rad = np.radians([p.heading for p in poses]).reshape(n, 1, 1)
    ch, sh = np.cos(rad), np.sin(rad)
    px = np.array([p.x for p in poses]).reshape(n, 1, 1) / belief.resolution
    py = np.array([p.y for p in poses]).reshape(n, 1, 1) / belief.resolution
    cols = np.floor(px + fwd * ch - left * sh + 0.5).astype(np.int64)
    rows = np.floor(py + fwd * sh + left * ch + 0.5).astype(np.int64)
    inside = (rows >= 0) & (rows < belief.height) & (cols >= 0) & (cols < belief.width)
    patches = np.zeros((n, size, size), dtype=np.int8)
    patches[inside] = belief.cells[rows[inside], cols[inside]]
    return patches


def render_views(
    belief: OccupancyMap,
    path: PlannedPath,
    cfg: ViewConfig = ViewConfig(),
    initial_heading: int = 0,
) -> list[RenderedView]:
    headings = path_headings(path.nodes, initial_heading)
    poses = [Pose(float(x), float(y), h) for (x, y), h in zip(path.nodes, headings)]
    patches = sample_patches(belief, poses, cfg.patch_size)
    return [RenderedView(p, patch) for p, patch in zip(poses, patches)]


# occupied -> -1, unknown -> 0, free -> +1
_SIGN = np.array([0.0, 1.0, -1.0])


def embed(view: RenderedView) -> Embedding:
    v = _SIGN[view.patch.ravel().astype(np.int64)]
    n = np.linalg.norm(v)
    if n == 0:
        e1 = np.zeros_like(v)
        e1[0] = 1.0
        return Embedding(e1)
    return Embedding(v / n)


def embed_many(views: Sequence[RenderedView]) -> list[Embedding]:
    """Vectorised :func:`embed` with identical results."""
    if not views:
        return []
    mat = _SIGN[np.stack([v.patch.ravel() for v in views]).astype(np.int64)]
    out = []
    for row in mat:
        n = np.linalg.norm(row)
        if n == 0:
            e1 = np.zeros_like(row)
            e1[0] = 1.0
            out.append(Embedding(e1))
        else:
            out.append(Embedding(row / n))
    return out


def cosine(a: Embedding, b: Embedding) -> float:
    va, vb = a.vector, b.vector
    return float(np.dot(va, vb) / (np.linalg.norm(va) * np.linalg.norm(vb)))


def prune(
    views: Sequence[RenderedView] | None,
    embeddings: Sequence[Embedding],
    tau: float = DEFAULT_TAU,
    mode: PruneMode = "last_kept",
) -> list[int]:
    """Indices of views kept after similarity pruning.

    ``last_kept`` compares each view with the most recently kept one;
    ``consecutive`` compares neighbours literally.
    """
    if views is not None and len(views) != len(embeddings):
        raise ValueError("views and embeddings differ in length")
    if not embeddings:
        raise ValueError("need at least one view")
    if not -1.0 < tau <= 1.0:
        raise ValueError("tau must lie in (-1, 1]")
    if mode not in ("last_kept", "consecutive"):
        raise ValueError(f"unknown prune mode {mode!r}")
    kept = [0]
    for k in range(len(embeddings) - 1):
        ref = kept[-1] if mode == "last_kept" else k
        if cosine(embeddings[ref], embeddings[k + 1]) < tau:
            kept.append(k + 1)
    return kept
