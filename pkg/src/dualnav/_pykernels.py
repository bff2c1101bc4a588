"""Pure-Python reference kernels.

Every function here has a twin in ``_ckernels.pyx`` with bit-identical
results; the floating-point expressions are written in the same order on
purpose, so keep the two files in sync when editing either one.
"""
from __future__ import annotations

import heapq
import math

import numpy as np

SQRT2 = math.sqrt(2.0)
_INF = float("inf")
_TOL = 1e-9

# (dr, dc) neighbour order is part of the determinism contract.
NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def _los_clear(occ, r0, c0, x0, y0, tr, tc):
    """Amanatides-Woo walk from (x0, y0) to the centre of (tr, tc).

    Intermediate occupied cells block the ray. When the ray passes exactly
    through a cell corner it is blocked only if both flanking cells are
    occupied.
    """
    dx = tc - x0
    dy = tr - y0
    sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
    sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
    if sx != 0:
        t_max_x = (c0 + 0.5 * sx - x0) / dx
        t_dx = sx / dx
    else:
        t_max_x = _INF
        t_dx = _INF
    if sy != 0:
        t_max_y = (r0 + 0.5 * sy - y0) / dy
        t_dy = sy / dy
    else:
        t_max_y = _INF
        t_dy = _INF
    nx = abs(tc - c0)
    ny = abs(tr - r0)
    r, c = r0, c0
    while nx > 0 or ny > 0:
        if nx > 0 and ny > 0 and t_max_x == t_max_y:
            if occ[r, c + sx] and occ[r + sy, c]:
                return False
            c += sx
            r += sy
            nx -= 1
            ny -= 1
            t_max_x += t_dx
            t_max_y += t_dy
        elif ny == 0 or (nx > 0 and t_max_x < t_max_y):
            c += sx
            nx -= 1
            t_max_x += t_dx
        else:
            r += sy
            ny -= 1
            t_max_y += t_dy
        if (nx > 0 or ny > 0) and occ[r, c]:
            return False
    return True


def visible_cells(occ, x, y, heading_deg, fov_deg, range_m, res):
    """Cells inside the viewing sector with a clear line of sight.

    ``occ`` is a 2-D uint8 array (nonzero = occupied). Position is in
    metres; cell (r, c) has its centre at (c * res, r * res). The agent's
    own cell is excluded. Returns an (n, 2) int64 array of (row, col) in
    row-major order.
    """
    h, w = occ.shape
    x0 = x / res
    y0 = y / res
    r0 = int(math.floor(y0 + 0.5))
    c0 = int(math.floor(x0 + 0.5))
    rng = range_m / res
    rng2 = rng * rng
    half = fov_deg / 2.0
    span = int(math.ceil(rng)) + 1
    rmin = max(0, r0 - span)
    rmax = min(h - 1, r0 + span)
    cmin = max(0, c0 - span)
    cmax = min(w - 1, c0 + span)
    out = []
    for r in range(rmin, rmax + 1):
        for c in range(cmin, cmax + 1):
            if r == r0 and c == c0:
                continue
            ddx = c - x0
            ddy = r - y0
            if ddx * ddx + ddy * ddy > rng2 + _TOL:
                continue
            ang = math.atan2(ddy, ddx) * 180.0 / math.pi - heading_deg
            ang = math.fmod(ang + 540.0, 360.0) - 180.0
            if abs(ang) > half + _TOL:
                continue
            if _los_clear(occ, r0, c0, x0, y0, r, c):
                out.append((r, c))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def _octile(r, c, tr, tc):
    dr = abs(r - tr)
    dc = abs(c - tc)
    lo = dr if dr < dc else dc
    hi = dr if dr > dc else dc
    return hi - lo, lo


def astar_grid(passable, sr, sc, tr, tc):
    """A* over 8-connected passable cells without corner cutting.

    Costs are tracked as (straight, diagonal) move counts so that the
    float cost ``straight + diagonal * sqrt(2)`` is order-independent.
    Ties on f break on lower h, then lower row-major id.

    Returns ``(cells, n_straight, n_diag)`` with ``cells`` an (n, 2)
    int64 array, or ``None`` when the target is unreachable.
    """
    h, w = passable.shape
    start = sr * w + sc
    goal = tr * w + tc
    g_s = {start: 0}
    g_d = {start: 0}
    parent = {start: -1}
    closed = set()
    ha, hb = _octile(sr, sc, tr, tc)
    hval = ha + hb * SQRT2
    heap = [(0 + 0 * SQRT2 + hval, hval, start)]
    while heap:
        f, hv, node = heapq.heappop(heap)
        if node in closed:
            continue
        closed.add(node)
        if node == goal:
            cells = []
            while node != -1:
                cells.append((node // w, node % w))
                node = parent[node]
            cells.reverse()
            return np.array(cells, dtype=np.int64), g_s[goal], g_d[goal]
        r, c = divmod(node, w)
        gs0 = g_s[node]
        gd0 = g_d[node]
        for dr, dc in NEIGHBOURS:
            nr = r + dr
            nc = c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w or not passable[nr, nc]:
                continue
            diag = dr != 0 and dc != 0
            if diag and (not passable[r, nc] or not passable[nr, c]):
                continue
            nb = nr * w + nc
            if nb in closed:
                continue
            if diag:
                ns, nd = gs0, gd0 + 1
            else:
                ns, nd = gs0 + 1, gd0
            g_new = ns + nd * SQRT2
            if nb in g_s and not g_new < g_s[nb] + g_d[nb] * SQRT2:
                continue
            g_s[nb] = ns
            g_d[nb] = nd
            parent[nb] = node
            ha, hb = _octile(nr, nc, tr, tc)
            hval = ha + hb * SQRT2
            heapq.heappush(heap, ((ns + ha) + (nd + hb) * SQRT2, hval, nb))
    return None


def distance_field(passable, sr, sc):
    """Dijkstra from one source over the same graph as :func:`astar_grid`.

    Returns (straight, diagonal) int64 arrays; unreachable cells hold -1.
    """
    h, w = passable.shape
    ds = np.full((h, w), -1, dtype=np.int64)
    dd = np.full((h, w), -1, dtype=np.int64)
    if not passable[sr, sc]:
        return ds, dd
    ds[sr, sc] = 0
    dd[sr, sc] = 0
    done = np.zeros((h, w), dtype=bool)
    heap = [(0.0, sr * w + sc)]
    while heap:
        _, node = heapq.heappop(heap)
        r, c = divmod(node, w)
        if done[r, c]:
            continue
        done[r, c] = True
        gs0 = int(ds[r, c])
        gd0 = int(dd[r, c])
        for dr, dc in NEIGHBOURS:
            nr = r + dr
            nc = c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w or not passable[nr, nc]:
                continue
            diag = dr != 0 and dc != 0
            if diag and (not passable[r, nc] or not passable[nr, c]):
                continue
            if done[nr, nc]:
                continue
            if diag:
                ns, nd = gs0, gd0 + 1
            else:
                ns, nd = gs0 + 1, gd0
            g_new = ns + nd * SQRT2
            if ds[nr, nc] >= 0 and not g_new < ds[nr, nc] + dd[nr, nc] * SQRT2:
                continue
            ds[nr, nc] = ns
            dd[nr, nc] = nd
            heapq.heappush(heap, (g_new, nr * w + nc))
    return ds, dd


def dtw(a, b):
    """Classic DTW with Euclidean point cost; returns the accumulated cost."""
    n = a.shape[0]
    m = b.shape[0]
    prev = [_INF] * (m + 1)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur = [_INF] * (m + 1)
        ax = a[i - 1, 0]
        ay = a[i - 1, 1]
        for j in range(1, m + 1):
            ddx = ax - b[j - 1, 0]
            ddy = ay - b[j - 1, 1]
            cost = math.sqrt(ddx * ddx + ddy * ddy)
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = cost + best
        prev = cur
    return prev[m]
