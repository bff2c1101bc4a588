# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; semantics mirror ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, fmod, floor, ceil, sqrt, fabs, INFINITY, M_PI
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double SQRT2 = sqrt(2.0)
cdef double _TOL = 1e-9
cdef int DR[8]
cdef int DC[8]
DR[:] = [-1, -1, -1, 0, 0, 1, 1, 1]
DC[:] = [-1, 0, 1, -1, 1, -1, 0, 1]


cdef bint _los_clear(const unsigned char[:, :] occ, int r0, int c0, double x0, double y0,
                     int tr, int tc) noexcept nogil:
    cdef double dx = tc - x0
    cdef double dy = tr - y0
    cdef int sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
    cdef int sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
    cdef double t_max_x, t_max_y, t_dx, t_dy
    if sx != 0:
        t_max_x = (c0 + 0.5 * sx - x0) / dx
        t_dx = sx / dx
    else:
        t_max_x = INFINITY
        t_dx = INFINITY
    if sy != 0:
        t_max_y = (r0 + 0.5 * sy - y0) / dy
        t_dy = sy / dy
    else:
        t_max_y = INFINITY
        t_dy = INFINITY
    cdef int nx = tc - c0 if tc >= c0 else c0 - tc
    cdef int ny = tr - r0 if tr >= r0 else r0 - tr
    cdef int r = r0, c = c0
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


def visible_cells(const unsigned char[:, :] occ, double x, double y, double heading_deg,
                  double fov_deg, double range_m, double res):
    cdef int h = occ.shape[0], w = occ.shape[1]
    cdef double x0 = x / res
    cdef double y0 = y / res
    cdef int r0 = <int>floor(y0 + 0.5)
    cdef int c0 = <int>floor(x0 + 0.5)
    cdef double rng = range_m / res
    cdef double rng2 = rng * rng
    cdef double half = fov_deg / 2.0
    cdef int span = <int>ceil(rng) + 1
    cdef int rmin = r0 - span if r0 - span > 0 else 0
    cdef int rmax = r0 + span if r0 + span < h - 1 else h - 1
    cdef int cmin = c0 - span if c0 - span > 0 else 0
    cdef int cmax = c0 + span if c0 + span < w - 1 else w - 1
    cdef int cap = (rmax - rmin + 1) * (cmax - cmin + 1)
    if cap < 0:
        cap = 0
    out = np.empty((cap, 2), dtype=np.int64)
    cdef long long[:, :] ov = out
    cdef int n = 0, r, c
    cdef double ddx, ddy, ang
    with nogil:
        for r in range(rmin, rmax + 1):
            for c in range(cmin, cmax + 1):
                if r == r0 and c == c0:
                    continue
                ddx = c - x0
                ddy = r - y0
                if ddx * ddx + ddy * ddy > rng2 + _TOL:
                    continue
                ang = atan2(ddy, ddx) * 180.0 / M_PI - heading_deg
                ang = fmod(ang + 540.0, 360.0) - 180.0
                if fabs(ang) > half + _TOL:
                    continue
                if _los_clear(occ, r0, c0, x0, y0, r, c):
                    ov[n, 0] = r
                    ov[n, 1] = c
                    n += 1
    return out[:n].copy()


# Binary min-heap keyed on (f, h, id).
cdef struct Entry:
    double f
    double h
    long long node


cdef inline bint _less(Entry a, Entry b) noexcept nogil:
    if a.f != b.f:
        return a.f < b.f
    if a.h != b.h:
        return a.h < b.h
    return a.node < b.node


cdef inline void _push(Entry* heap, long long* size, Entry e) noexcept nogil:
    cdef long long i = size[0]
    cdef long long p
    size[0] += 1
    heap[i] = e
    while i > 0:
        p = (i - 1) >> 1
        if _less(heap[i], heap[p]):
            heap[i], heap[p] = heap[p], heap[i]
            i = p
        else:
            break


cdef inline Entry _pop(Entry* heap, long long* size) noexcept nogil:
    cdef Entry top = heap[0]
    cdef long long i = 0, l, r, m
    size[0] -= 1
    heap[0] = heap[size[0]]
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < size[0] and _less(heap[l], heap[m]):
            m = l
        if r < size[0] and _less(heap[r], heap[m]):
            m = r
        if m == i:
            break
        heap[i], heap[m] = heap[m], heap[i]
        i = m
    return top


def astar_grid(const unsigned char[:, :] passable, int sr, int sc, int tr, int tc):
    cdef int h = passable.shape[0], w = passable.shape[1]
    cdef long long n = <long long>h * w
    gs_arr = np.full(n, -1, dtype=np.int64)
    gd_arr = np.full(n, -1, dtype=np.int64)
    par_arr = np.full(n, -1, dtype=np.int64)
    closed_arr = np.zeros(n, dtype=np.uint8)
    cdef long long[:] g_s = gs_arr
    cdef long long[:] g_d = gd_arr
    cdef long long[:] parent = par_arr
    cdef unsigned char[:] closed = closed_arr
    cdef long long cap = 8 * n + 8
    cdef Entry* heap = <Entry*>malloc(cap * sizeof(Entry))
    if heap == NULL:
        raise MemoryError()
    cdef long long size = 0
    cdef long long start = <long long>sr * w + sc
    cdef long long goal = <long long>tr * w + tc
    cdef long long node, nb
    cdef int r, c, nr, nc, k, dr, dc, ha, hb, adr, adc
    cdef long long ns, nd, gs0, gd0
    cdef double g_new, hval
    cdef bint diag, found = False
    cdef Entry e
    g_s[start] = 0
    g_d[start] = 0
    adr = sr - tr if sr >= tr else tr - sr
    adc = sc - tc if sc >= tc else tc - sc
    hb = adr if adr < adc else adc
    ha = (adr if adr > adc else adc) - hb
    hval = ha + hb * SQRT2
    e.f = 0 + 0 * SQRT2 + hval
    e.h = hval
    e.node = start
    _push(heap, &size, e)
    with nogil:
        while size > 0:
            e = _pop(heap, &size)
            node = e.node
            if closed[node]:
                continue
            closed[node] = 1
            if node == goal:
                found = True
                break
            r = <int>(node / w)
            c = <int>(node - <long long>r * w)
            gs0 = g_s[node]
            gd0 = g_d[node]
            for k in range(8):
                dr = DR[k]
                dc = DC[k]
                nr = r + dr
                nc = c + dc
                if nr < 0 or nr >= h or nc < 0 or nc >= w or not passable[nr, nc]:
                    continue
                diag = dr != 0 and dc != 0
                if diag and (not passable[r, nc] or not passable[nr, c]):
                    continue
                nb = <long long>nr * w + nc
                if closed[nb]:
                    continue
                if diag:
                    ns = gs0
                    nd = gd0 + 1
                else:
                    ns = gs0 + 1
                    nd = gd0
                g_new = ns + nd * SQRT2
                if g_s[nb] >= 0 and not g_new < g_s[nb] + g_d[nb] * SQRT2:
                    continue
                g_s[nb] = ns
                g_d[nb] = nd
                parent[nb] = node
                adr = nr - tr if nr >= tr else tr - nr
                adc = nc - tc if nc >= tc else tc - nc
                hb = adr if adr < adc else adc
                ha = (adr if adr > adc else adc) - hb
                hval = ha + hb * SQRT2
                e.f = (ns + ha) + (nd + hb) * SQRT2
                e.h = hval
                e.node = nb
                _push(heap, &size, e)
    free(heap)
    if not found:
        return None
    cells = []
    node = goal
    while node != -1:
        cells.append((node // w, node % w))
        node = parent[node]
    cells.reverse()
    return np.array(cells, dtype=np.int64), int(g_s[goal]), int(g_d[goal])


def distance_field(const unsigned char[:, :] passable, int sr, int sc):
    cdef int h = passable.shape[0], w = passable.shape[1]
    ds_arr = np.full((h, w), -1, dtype=np.int64)
    dd_arr = np.full((h, w), -1, dtype=np.int64)
    if not passable[sr, sc]:
        return ds_arr, dd_arr
    cdef long long[:, :] ds = ds_arr
    cdef long long[:, :] dd = dd_arr
    done_arr = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, :] done = done_arr
    cdef long long n = <long long>h * w
    cdef long long cap = 8 * n + 8
    cdef Entry* heap = <Entry*>malloc(cap * sizeof(Entry))
    if heap == NULL:
        raise MemoryError()
    cdef long long size = 0
    cdef Entry e
    cdef long long node, ns, nd, gs0, gd0
    cdef int r, c, nr, nc, k, dr, dc
    cdef double g_new
    cdef bint diag
    ds[sr, sc] = 0
    dd[sr, sc] = 0
    e.f = 0.0
    e.h = 0.0
    e.node = <long long>sr * w + sc
    _push(heap, &size, e)
    with nogil:
        while size > 0:
            e = _pop(heap, &size)
            node = e.node
            r = <int>(node / w)
            c = <int>(node - <long long>r * w)
            if done[r, c]:
                continue
            done[r, c] = 1
            gs0 = ds[r, c]
            gd0 = dd[r, c]
            for k in range(8):
                dr = DR[k]
                dc = DC[k]
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
                    ns = gs0
                    nd = gd0 + 1
                else:
                    ns = gs0 + 1
                    nd = gd0
                g_new = ns + nd * SQRT2
                if ds[nr, nc] >= 0 and not g_new < ds[nr, nc] + dd[nr, nc] * SQRT2:
                    continue
                ds[nr, nc] = ns
                dd[nr, nc] = nd
                e.f = g_new
                e.h = 0.0
                e.node = <long long>nr * w + nc
                _push(heap, &size, e)
    free(heap)
    return ds_arr, dd_arr


def dtw(const double[:, :] a, const double[:, :] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    prev_arr = np.empty(m + 1, dtype=np.float64)
    cur_arr = np.empty(m + 1, dtype=np.float64)
    cdef double[:] prev = prev_arr
    cdef double[:] cur = cur_arr
    cdef double[:] tmp
    cdef double ax, ay, ddx, ddy, cost, best
    with nogil:
        prev[0] = 0.0
        for j in range(1, m + 1):
            prev[j] = INFINITY
        for i in range(1, n + 1):
            cur[0] = INFINITY
            ax = a[i - 1, 0]
            ay = a[i - 1, 1]
            for j in range(1, m + 1):
                ddx = ax - b[j - 1, 0]
                ddy = ay - b[j - 1, 1]
                cost = sqrt(ddx * ddx + ddy * ddy)
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if cur[j - 1] < best:
                    best = cur[j - 1]
                cur[j] = cost + best
            tmp = prev
            prev = cur
            cur = tmp
    return float(prev[m])
