"""Bounding-volume hierarchy over triangles with numba-compiled queries.

Used for occlusion rays (internal-surface removal), closest-hit ray casting,
and exact point-to-surface distances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

_JIT = dict(cache=True, error_model="numpy")
LEAF_SIZE = 4
_STACK = 128


@dataclass(frozen=True)
class Bvh:
    tris: np.ndarray  # (F, 3, 3) float64
    lo: np.ndarray  # (N, 3)
    hi: np.ndarray  # (N, 3)
    left: np.ndarray  # (N,) child index, -1 for leaves
    right: np.ndarray
    start: np.ndarray  # (N,) offset into ``order`` for leaves
    count: np.ndarray
    order: np.ndarray  # (F,) triangle ids in leaf order

    @property
    def n_triangles(self) -> int:
        return len(self.tris)


def build_bvh(triangles: np.ndarray) -> Bvh:
    tris = np.ascontiguousarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
    if len(tris) == 0:
        z = np.zeros((1, 3))
        return Bvh(tris, z + np.inf, z - np.inf, np.array([-1]), np.array([-1]),
                   np.array([0]), np.array([0]), np.zeros(0, dtype=np.int64))
    lo, hi, left, right, start, count, order, n = _build(tris, LEAF_SIZE)
    return Bvh(tris, lo[:n], hi[:n], left[:n], right[:n], start[:n], count[:n], order)


@nb.njit(**_JIT)
def _build(tris, leaf_size):
    f = tris.shape[0]
    cap = 2 * f + 1
    lo = np.empty((cap, 3))
    hi = np.empty((cap, 3))
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    start = np.zeros(cap, dtype=np.int64)
    count = np.zeros(cap, dtype=np.int64)
    order = np.arange(f)
    cent = np.empty((f, 3))
    for i in range(f):
        for k in range(3):
            cent[i, k] = (tris[i, 0, k] + tris[i, 1, k] + tris[i, 2, k]) / 3.0

    stack_node = np.empty(cap, dtype=np.int64)
    stack_s = np.empty(cap, dtype=np.int64)
    stack_e = np.empty(cap, dtype=np.int64)
    sp = 0
    stack_node[0] = 0
    stack_s[0] = 0
    stack_e[0] = f
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        s = stack_s[sp]
        e = stack_e[sp]
        for k in range(3):
            lo[node, k] = np.inf
            hi[node, k] = -np.inf
        clo = np.full(3, np.inf)
        chi = np.full(3, -np.inf)
        for i in range(s, e):
            t = order[i]
            for k in range(3):
                for c in range(3):
                    v = tris[t, c, k]
                    if v < lo[node, k]:
                        lo[node, k] = v
                    if v > hi[node, k]:
                        hi[node, k] = v
                if cent[t, k] < clo[k]:
                    clo[k] = cent[t, k]
                if cent[t, k] > chi[k]:
                    chi[k] = cent[t, k]
        if e - s <= leaf_size:
            start[node] = s
            count[node] = e - s
            continue
        axis = 0
        ext = chi[0] - clo[0]
        for k in range(1, 3):
            if chi[k] - clo[k] > ext:
                ext = chi[k] - clo[k]
                axis = k
        keys = np.empty(e - s)
        for i in range(s, e):
            keys[i - s] = cent[order[i], axis]
        perm = np.argsort(keys, kind="mergesort")
        seg = order[s:e].copy()
        for i in range(e - s):
            order[s + i] = seg[perm[i]]
        mid = (s + e) // 2
        l_id = n_nodes
        r_id = n_nodes + 1
        n_nodes += 2
        left[node] = l_id
        right[node] = r_id
        stack_node[sp] = l_id
        stack_s[sp] = s
        stack_e[sp] = mid
        sp += 1
        stack_node[sp] = r_id
        stack_s[sp] = mid
        stack_e[sp] = e
        sp += 1
    return lo, hi, left, right, start, count, order, n_nodes


@nb.njit(**_JIT)
def _ray_tri(o, d, tris, t, tmin, tmax):
    """Moller-Trumbore, double sided. Returns hit distance or inf."""
    e1x = tris[t, 1, 0] - tris[t, 0, 0]
    e1y = tris[t, 1, 1] - tris[t, 0, 1]
    e1z = tris[t, 1, 2] - tris[t, 0, 2]
    e2x = tris[t, 2, 0] - tris[t, 0, 0]
    e2y = tris[t, 2, 1] - tris[t, 0, 1]
    e2z = tris[t, 2, 2] - tris[t, 0, 2]
    px = d[1] * e2z - d[2] * e2y
    py = d[2] * e2x - d[0] * e2z
    pz = d[0] * e2y - d[1] * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < 1e-15:
        return np.inf
    inv = 1.0 / det
    sx = o[0] - tris[t, 0, 0]
    sy = o[1] - tris[t, 0, 1]
    sz = o[2] - tris[t, 0, 2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < 0.0 or u > 1.0:
        return np.inf
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return np.inf
    tt = (e2x * qx + e2y * qy + e2z * qz) * inv
    if tt <= tmin or tt >= tmax:
        return np.inf
    return tt


@nb.njit(**_JIT)
def _ray_box(o, inv, lo, hi, node, tmax):
    t0 = 0.0
    t1 = tmax
    for k in range(3):
        a = (lo[node, k] - o[k]) * inv[k]
        b = (hi[node, k] - o[k]) * inv[k]
        if a > b:
            a, b = b, a
        # NaN from 0*inf (ray in slab plane) keeps the box.
        if a > t0:
            t0 = a
        if b < t1:
            t1 = b
        if t0 > t1:
            return False
    return True


@nb.njit(**_JIT)
def _cast(tris, lo, hi, left, right, start, count, order, origins, dirs, tmin, tmax, any_hit):
    n = origins.shape[0]
    best_t = np.full(n, np.inf)
    best_f = np.full(n, -1, dtype=np.int64)
    stack = np.empty(_STACK, dtype=np.int64)
    inv = np.empty(3)
    for r in range(n):
        o = origins[r]
        d = dirs[r]
        for k in range(3):
            inv[k] = 1.0 / d[k]
        closest = tmax
        sp = 0
        stack[sp] = 0
        sp += 1
        done = False
        while sp > 0 and not done:
            sp -= 1
            node = stack[sp]
            if not _ray_box(o, inv, lo, hi, node, closest):
                continue
            if left[node] < 0:
                for i in range(start[node], start[node] + count[node]):
                    t = order[i]
                    th = _ray_tri(o, d, tris, t, tmin, closest)
                    if th < closest:
                        closest = th
                        best_t[r] = th
                        best_f[r] = t
                        if any_hit:
                            done = True
                            break
            else:
                stack[sp] = left[node]
                sp += 1
                stack[sp] = right[node]
                sp += 1
    return best_t, best_f


def _prep_rays(bvh, origins, dirs):
    o = np.ascontiguousarray(np.broadcast_to(origins, np.shape(dirs)), dtype=np.float64).reshape(-1, 3)
    d = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    return o, d


def ray_hits(bvh: Bvh, origins, dirs, tmin: float = 0.0, tmax: float = np.inf) -> np.ndarray:
    """Boolean per ray: does it hit any triangle with ``tmin < t < tmax``."""
    o, d = _prep_rays(bvh, origins, dirs)
    if bvh.n_triangles == 0:
        return np.zeros(len(o), dtype=bool)
    t, _ = _cast(bvh.tris, bvh.lo, bvh.hi, bvh.left, bvh.right, bvh.start, bvh.count,
                 bvh.order, o, d, float(tmin), float(tmax), True)
    return np.isfinite(t)


def ray_closest(bvh: Bvh, origins, dirs, tmin: float = 0.0, tmax: float = np.inf):
    """Nearest hit distance (inf on miss) and triangle id (-1 on miss)."""
    o, d = _prep_rays(bvh, origins, dirs)
    if bvh.n_triangles == 0:
        return np.full(len(o), np.inf), np.full(len(o), -1, dtype=np.int64)
    return _cast(bvh.tris, bvh.lo, bvh.hi, bvh.left, bvh.right, bvh.start, bvh.count,
                 bvh.order, o, d, float(tmin), float(tmax), False)


@nb.njit(**_JIT)
def _closest_on_tri(p, a, b, c, out):
    # Ericson, Real-Time Collision Detection 5.1.5
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        out[:] = a
        return
    bpx, bpy, bpz = p[0] - b[0], p[1] - b[1], p[2] - b[2]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        out[:] = b
        return
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        out[0] = a[0] + v * abx
        out[1] = a[1] + v * aby
        out[2] = a[2] + v * abz
        return
    cpx, cpy, cpz = p[0] - c[0], p[1] - c[1], p[2] - c[2]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        out[:] = c
        return
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        out[0] = a[0] + w * acx
        out[1] = a[1] + w * acy
        out[2] = a[2] + w * acz
        return
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out[0] = b[0] + w * (c[0] - b[0])
        out[1] = b[1] + w * (c[1] - b[1])
        out[2] = b[2] + w * (c[2] - b[2])
        return
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    out[0] = a[0] + abx * v + acx * w
    out[1] = a[1] + aby * v + acy * w
    out[2] = a[2] + abz * v + acz * w


@nb.njit(**_JIT)
def _box_dist2(p, lo, hi, node):
    s = 0.0
    for k in range(3):
        if p[k] < lo[node, k]:
            g = lo[node, k] - p[k]
            s += g * g
        elif p[k] > hi[node, k]:
            g = p[k] - hi[node, k]
            s += g * g
    return s


@nb.njit(**_JIT)
def _nearest(tris, lo, hi, left, right, start, count, order, points):
    n = points.shape[0]
    dist = np.empty(n)
    face = np.full(n, -1, dtype=np.int64)
    closest = np.empty((n, 3))
    stack = np.empty(_STACK, dtype=np.int64)
    q = np.empty(3)
    for r in range(n):
        p = points[r]
        best = np.inf
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if _box_dist2(p, lo, hi, node) >= best:
                continue
            if left[node] < 0:
                for i in range(start[node], start[node] + count[node]):
                    t = order[i]
                    _closest_on_tri(p, tris[t, 0], tris[t, 1], tris[t, 2], q)
                    d2 = (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2 + (q[2] - p[2]) ** 2
                    if d2 < best:
                        best = d2
                        face[r] = t
                        closest[r, 0] = q[0]
                        closest[r, 1] = q[1]
                        closest[r, 2] = q[2]
            else:
                a = left[node]
                b = right[node]
                # push the farther child first so the nearer one pops first
                if _box_dist2(p, lo, hi, a) < _box_dist2(p, lo, hi, b):
                    a, b = b, a
                stack[sp] = a
                sp += 1
                stack[sp] = b
                sp += 1
        dist[r] = np.sqrt(best)
    return dist, face, closest


def closest_points(bvh: Bvh, points):
    """Exact point-to-surface distance, nearest triangle id and foot point."""
    p = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    if bvh.n_triangles == 0:
        raise ValueError("closest_points on an empty triangle set")
    return _nearest(bvh.tris, bvh.lo, bvh.hi, bvh.left, bvh.right, bvh.start, bvh.count,
                    bvh.order, p)
