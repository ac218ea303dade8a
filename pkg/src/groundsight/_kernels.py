"""Numba kernels behind :mod:`groundsight.filtering`.

The kd-tree is implicit: node ``i`` owns a contiguous slice of the
permutation array, its children are ``2i+1`` and ``2i+2``, and the median
element of the slice is stored at the node itself.  Slices of at most
``leaf_size`` points are leaves and are scanned linearly.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _select(keys, perm, lo, hi, k):
    # Hoare quickselect over keys[lo:hi], moving perm alongside: afterwards
    # keys[k] is the k-th smallest, with <= to its left and >= to its right.
    l = lo
    r = hi - 1
    while r > l:
        a = keys[l]
        b = keys[(l + r) // 2]
        c = keys[r]
        if a < b:
            pivot = b if b < c else (c if a < c else a)
        else:
            pivot = a if a < c else (c if b < c else b)
        i = l
        j = r
        while i <= j:
            while keys[i] < pivot:
                i += 1
            while keys[j] > pivot:
                j -= 1
            if i <= j:
                t = keys[i]
                keys[i] = keys[j]
                keys[j] = t
                t2 = perm[i]
                perm[i] = perm[j]
                perm[j] = t2
                i += 1
                j -= 1
        if k <= j:
            r = j
        elif k >= i:
            l = i
        else:
            return


@njit(cache=True)
def build(pts, leaf_size):
    """Returns (perm, tree-ordered points, axes, lo, hi, used, leaf_of)."""
    n = pts.shape[0]
    depth = 0
    size = n
    while size > leaf_size:
        size = size // 2  # larger child of a split node
        depth += 1
    n_nodes = (1 << (depth + 1)) - 1
    perm = np.arange(n)
    keys = np.empty(n)
    axes = np.full(n_nodes, -1, dtype=np.int8)
    lo_arr = np.zeros(n_nodes, dtype=np.int64)
    hi_arr = np.zeros(n_nodes, dtype=np.int64)
    used = np.zeros(n_nodes, dtype=np.bool_)
    leaf_of = np.full(n, -1, dtype=np.int64)
    # loose per-node bounds: the root's data box, narrowed at each split
    bmin = np.empty((n_nodes, 3))
    bmax = np.empty((n_nodes, 3))
    for a in range(3):
        bmin[0, a] = np.inf
        bmax[0, a] = -np.inf
    for i in range(n):
        for a in range(3):
            v = pts[i, a]
            if v < bmin[0, a]:
                bmin[0, a] = v
            if v > bmax[0, a]:
                bmax[0, a] = v

    stack = np.empty((depth + 2, 3), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp, 0]
        lo = stack[sp, 1]
        hi = stack[sp, 2]
        used[node] = True
        lo_arr[node] = lo
        hi_arr[node] = hi
        if hi - lo <= leaf_size:
            for i in range(lo, hi):
                leaf_of[i] = node
            continue
        best = 0
        best_span = -1.0
        for a in range(3):
            span = bmax[node, a] - bmin[node, a]
            if span > best_span:
                best_span = span
                best = a
        mid = (lo + hi) // 2
        for i in range(lo, hi):
            keys[i] = pts[perm[i], best]
        _select(keys, perm, lo, hi, mid)
        axes[node] = best
        split = keys[mid]
        left = 2 * node + 1
        right = 2 * node + 2
        for a in range(3):
            bmin[left, a] = bmin[node, a]
            bmax[left, a] = bmax[node, a]
            bmin[right, a] = bmin[node, a]
            bmax[right, a] = bmax[node, a]
        bmax[left, best] = split
        bmin[right, best] = split
        stack[sp, 0] = left
        stack[sp, 1] = lo
        stack[sp, 2] = mid
        sp += 1
        stack[sp, 0] = right
        stack[sp, 1] = mid + 1
        stack[sp, 2] = hi
        sp += 1
    spts = np.empty((n, 3))
    for i in range(n):
        for a in range(3):
            spts[i, a] = pts[perm[i], a]
    return perm, spts, axes, lo_arr, hi_arr, used, leaf_of


@njit(cache=True)
def _count(spts, axes, lo_arr, hi_arr, used, qx, qy, qz, r2, cap, stack, count, skip):
    # spts holds the points in tree order; leaf `skip` is not visited and
    # `count` is the number already found there.
    exact = False
    stack[0] = 0
    sp = 1
    n_nodes = used.shape[0]
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if node >= n_nodes or not used[node] or node == skip:
            continue
        lo = lo_arr[node]
        hi = hi_arr[node]
        ax = axes[node]
        if ax < 0:
            for j in range(lo, hi):
                dx = spts[j, 0] - qx
                dy = spts[j, 1] - qy
                dz = spts[j, 2] - qz
                if dx * dx + dy * dy + dz * dz <= r2:
                    count += 1
                    if dx == 0.0 and dy == 0.0 and dz == 0.0:
                        exact = True
                    if cap > 0 and count >= cap:
                        return count, exact
            continue
        j = (lo + hi) // 2
        dx = spts[j, 0] - qx
        dy = spts[j, 1] - qy
        dz = spts[j, 2] - qz
        if dx * dx + dy * dy + dz * dz <= r2:
            count += 1
            if dx == 0.0 and dy == 0.0 and dz == 0.0:
                exact = True
            if cap > 0 and count >= cap:
                return count, exact
        if ax == 0:
            diff = qx - spts[j, 0]
        elif ax == 1:
            diff = qy - spts[j, 1]
        else:
            diff = qz - spts[j, 2]
        if diff <= 0.0:
            near = 2 * node + 1
            far = 2 * node + 2
        else:
            near = 2 * node + 2
            far = 2 * node + 1
        if diff * diff <= r2:
            stack[sp] = far
            sp += 1
        stack[sp] = near
        sp += 1
    return count, exact


@njit(cache=True)
def count_within(spts, axes, lo_arr, hi_arr, used, q, r2, cap):
    """Count tree points with squared distance <= r2 from q.

    Stops early once `cap` points are found (cap <= 0 disables the cap).
    Returns (count, whether an exact copy of q was found).
    """
    stack = np.empty(256, dtype=np.int64)
    return _count(spts, axes, lo_arr, hi_arr, used, q[0], q[1], q[2], r2, cap, stack, 0, -1)


@njit(cache=True)
def member_counts(spts, axes, lo_arr, hi_arr, used, leaf_of, r2, cap):
    """Counts for every tree point in tree order, self included.

    Each query scans its own leaf first; dense regions usually reach `cap`
    there without descending from the root.
    """
    n = spts.shape[0]
    out = np.empty(n, dtype=np.int64)
    stack = np.empty(256, dtype=np.int64)
    for i in range(n):
        qx = spts[i, 0]
        qy = spts[i, 1]
        qz = spts[i, 2]
        leaf = leaf_of[i]
        c = 0
        if leaf >= 0:
            for j in range(lo_arr[leaf], hi_arr[leaf]):
                dx = spts[j, 0] - qx
                dy = spts[j, 1] - qy
                dz = spts[j, 2] - qz
                if dx * dx + dy * dy + dz * dz <= r2:
                    c += 1
        if cap > 0 and c >= cap:
            out[i] = c
            continue
        c, _ = _count(spts, axes, lo_arr, hi_arr, used, qx, qy, qz, r2, cap, stack, c, leaf)
        out[i] = c
    return out


@njit(cache=True)
def bounds(points):
    """Per-axis (min, max) of a non-empty (n, 3) array."""
    mn = points[0].copy()
    mx = points[0].copy()
    for i in range(1, points.shape[0]):
        for a in range(3):
            v = points[i, a]
            if v < mn[a]:
                mn[a] = v
            elif v > mx[a]:
                mx[a] = v
    return mn, mx


@njit(cache=True)
def voxel_dense(points, cell, mn, mx):
    """Centroid per occupied voxel, voxels in lexicographic (ix, iy, iz) order.

    Members are summed in input order.
    """
    n = points.shape[0]
    d1 = mx[1] - mn[1] + 1
    d2 = mx[2] - mn[2] + 1
    total = (mx[0] - mn[0] + 1) * d1 * d2
    slot = np.full(total, -1, dtype=np.int32)
    pid = np.empty(n, dtype=np.int32)
    m = 0
    for i in range(n):
        key = (
            (np.int64(math.floor(points[i, 0] / cell[0])) - mn[0]) * d1
            + (np.int64(math.floor(points[i, 1] / cell[1])) - mn[1])
        ) * d2 + (np.int64(math.floor(points[i, 2] / cell[2])) - mn[2])
        s = slot[key]
        if s < 0:
            s = m
            slot[key] = m
            m += 1
        pid[i] = s
    rank = np.empty(m, dtype=np.int32)
    r = 0
    for key in range(total):
        s = slot[key]
        if s >= 0:
            rank[s] = r
            r += 1
    counts = np.zeros(m, dtype=np.int64)
    out = np.zeros((m, 3))
    for i in range(n):
        k = rank[pid[i]]
        counts[k] += 1
        out[k, 0] += points[i, 0]
        out[k, 1] += points[i, 1]
        out[k, 2] += points[i, 2]
    for k in range(m):
        out[k, 0] /= counts[k]
        out[k, 1] /= counts[k]
        out[k, 2] /= counts[k]
    return out


@njit(cache=True)
def grid_member_counts(points, cell, mn, mx, r2, cap):
    """Neighbor counts (self included) by bucketing into cubes of side `cell`.

    `cell` must be at least the query radius so every neighbor lies in one
    of the 27 surrounding cubes; `mn`/`mx` bound the cube indices.  The
    point's own cube is scanned first so `cap` is often reached early.
    """
    n = points.shape[0]
    d0 = mx[0] - mn[0] + 1
    d1 = mx[1] - mn[1] + 1
    d2 = mx[2] - mn[2] + 1
    total = d0 * d1 * d2
    ci = np.empty((n, 3), dtype=np.int64)
    key = np.empty(n, dtype=np.int64)
    start = np.zeros(total + 1, dtype=np.int64)
    for i in range(n):
        for a in range(3):
            ci[i, a] = np.int64(math.floor(points[i, a] / cell)) - mn[a]
        k = (ci[i, 0] * d1 + ci[i, 1]) * d2 + ci[i, 2]
        key[i] = k
        start[k + 1] += 1
    for k in range(total):
        start[k + 1] += start[k]
    fill = start[:-1].copy()
    spts = np.empty((n, 3))
    for i in range(n):
        k = key[i]
        j = fill[k]
        fill[k] += 1
        spts[j, 0] = points[i, 0]
        spts[j, 1] = points[i, 1]
        spts[j, 2] = points[i, 2]

    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        qx = points[i, 0]
        qy = points[i, 1]
        qz = points[i, 2]
        own = key[i]
        c = 0
        for j in range(start[own], start[own + 1]):
            dx = spts[j, 0] - qx
            dy = spts[j, 1] - qy
            dz = spts[j, 2] - qz
            if dx * dx + dy * dy + dz * dz <= r2:
                c += 1
        if cap > 0 and c >= cap:
            out[i] = c
            continue
        done = False
        for ox in range(-1, 2):
            x = ci[i, 0] + ox
            if x < 0 or x >= d0 or done:
                continue
            for oy in range(-1, 2):
                y = ci[i, 1] + oy
                if y < 0 or y >= d1 or done:
                    continue
                for oz in range(-1, 2):
                    z = ci[i, 2] + oz
                    if z < 0 or z >= d2 or done:
                        continue
                    k = (x * d1 + y) * d2 + z
                    if k == own:
                        continue
                    for j in range(start[k], start[k + 1]):
                        dx = spts[j, 0] - qx
                        dy = spts[j, 1] - qy
                        dz = spts[j, 2] - qz
                        if dx * dx + dy * dy + dz * dz <= r2:
                            c += 1
                            if cap > 0 and c >= cap:
                                done = True
                                break
        out[i] = c
    return out
