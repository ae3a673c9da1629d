"""Pure-numpy reference implementations of the hot kernels.

Every function here has a numba twin in `_numba.py`; the pair must agree
bit-for-bit, so expressions are written with the exact same per-element
operation order (no fused reductions, strict `<` tie-breaking).
"""

from __future__ import annotations

import numpy as np


def slic_iterate(lab, seed_xy, seed_lab, step, ratio, n_iters):
    """SLIC assignment/update loop.

    lab: (H, W, 3) float64 CIELab image; seed_xy: (K, 2) float64 (x, y);
    seed_lab: (K, 3); ratio = (compactness / step)^2. Returns
    (labels int32 (H, W), centers_xy, centers_lab). Clusters are scanned
    in ascending id with strict-less updates, so ties go to the lowest id.
    """
    h, w = lab.shape[:2]
    k = seed_xy.shape[0]
    half = int(np.ceil(step)) + 1
    cx = seed_xy[:, 0].copy()
    cy = seed_xy[:, 1].copy()
    clab = seed_lab.copy()
    labels = np.full((h, w), -1, dtype=np.int32)
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    for _ in range(n_iters):
        dist = np.full((h, w), np.inf, dtype=np.float64)
        labels.fill(-1)
        for kk in range(k):
            r0 = max(0, int(np.floor(cy[kk] + 0.5)) - half)
            r1 = min(h, int(np.floor(cy[kk] + 0.5)) + half + 1)
            c0 = max(0, int(np.floor(cx[kk] + 0.5)) - half)
            c1 = min(w, int(np.floor(cx[kk] + 0.5)) + half + 1)
            if r0 >= r1 or c0 >= c1:
                continue
            block = lab[r0:r1, c0:c1]
            dl = block[:, :, 0] - clab[kk, 0]
            da = block[:, :, 1] - clab[kk, 1]
            db = block[:, :, 2] - clab[kk, 2]
            dy = ys[r0:r1, None] - cy[kk]
            dx = xs[None, c0:c1] - cx[kk]
            d = ((dl * dl + da * da) + db * db) + ratio * (dy * dy + dx * dx)
            win_d = dist[r0:r1, c0:c1]
            better = d < win_d
            win_d[better] = d[better]
            labels[r0:r1, c0:c1][better] = kk
        # pixels missed by every window: nearest center spatially
        if (labels < 0).any():
            miss_r, miss_c = np.nonzero(labels < 0)
            for r, c in zip(miss_r, miss_c):
                best, best_d = 0, np.inf
                for kk in range(k):
                    dy = float(r) - cy[kk]
                    dx = float(c) - cx[kk]
                    d = dy * dy + dx * dx
                    if d < best_d:
                        best_d = d
                        best = kk
                labels[r, c] = best
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=k).astype(np.float64)
        sums_x = np.bincount(flat, weights=np.broadcast_to(xs, (h, w)).ravel(), minlength=k)
        sums_y = np.bincount(flat, weights=np.broadcast_to(ys[:, None], (h, w)).ravel(), minlength=k)
        occupied = counts > 0
        cx[occupied] = sums_x[occupied] / counts[occupied]
        cy[occupied] = sums_y[occupied] / counts[occupied]
        for ch in range(3):
            sums = np.bincount(flat, weights=lab[:, :, ch].ravel(), minlength=k)
            clab[occupied, ch] = sums[occupied] / counts[occupied]
    return labels, np.stack([cx, cy], axis=1), clab


def label_components(labels):
    """4-connected components of equal-value regions, scan-order ids.

    Returns (comp int32 (H, W), n_components); component ids follow the
    raster order of each component's first pixel.
    """
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int32)
    stack = np.empty(h * w, dtype=np.int64)
    n = 0
    for start in range(h * w):
        if comp.flat[start] >= 0:
            continue
        value = labels.flat[start]
        top = 0
        stack[top] = start
        top += 1
        comp.flat[start] = n
        while top > 0:
            top -= 1
            idx = stack[top]
            r, c = divmod(idx, w)
            if r > 0 and comp[r - 1, c] < 0 and labels[r - 1, c] == value:
                comp[r - 1, c] = n
                stack[top] = idx - w
                top += 1
            if r + 1 < h and comp[r + 1, c] < 0 and labels[r + 1, c] == value:
                comp[r + 1, c] = n
                stack[top] = idx + w
                top += 1
            if c > 0 and comp[r, c - 1] < 0 and labels[r, c - 1] == value:
                comp[r, c - 1] = n
                stack[top] = idx - 1
                top += 1
            if c + 1 < w and comp[r, c + 1] < 0 and labels[r, c + 1] == value:
                comp[r, c + 1] = n
                stack[top] = idx + 1
                top += 1
        n += 1
    return comp, n


def hs_solve(ix, iy, it, alpha2, iters):
    """Horn-Schunck Jacobi relaxation; returns (u, v) float64."""
    h, w = ix.shape
    u = np.zeros((h, w), dtype=np.float64)
    v = np.zeros((h, w), dtype=np.float64)
    denom = alpha2 + (ix * ix + iy * iy)
    for _ in range(iters):
        up = np.pad(u, 1, mode="edge")
        vp = np.pad(v, 1, mode="edge")
        ubar = ((up[:-2, 1:-1] + up[2:, 1:-1]) + (up[1:-1, :-2] + up[1:-1, 2:])) * 0.25
        vbar = ((vp[:-2, 1:-1] + vp[2:, 1:-1]) + (vp[1:-1, :-2] + vp[1:-1, 2:])) * 0.25
        t = (ix * ubar + iy * vbar + it) / denom
        u = ubar - ix * t
        v = vbar - iy * t
    return u, v


def mrf_sweep(labels, f01, indptr, indices, weights, tem0, tem1, lam1):
    """One Gauss-Seidel sweep of single-flip moves in ascending id order.

    labels: (K,) int8 in {0,1}, updated in place. f01: (K, 2) data terms.
    (indptr, indices, weights): CSR spatial adjacency with pair weights.
    tem0/tem1: per-node temporal penalty (already scaled by lambda2) for
    label 0/1. lam1 scales the spatial term; the flip test uses the global
    energy delta, where each undirected spatial pair counts twice.
    Returns the number of accepted flips.
    """
    k = labels.shape[0]
    flips = 0
    for i in range(k):
        cur = labels[i]
        alt = 1 - cur
        s_cur = 0.0
        s_alt = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            w = weights[p]
            if labels[j] != cur:
                s_cur += w
            if labels[j] != alt:
                s_alt += w
        if cur == 0:
            d_data = f01[i, 0] - f01[i, 1]
            d_tem = tem1[i] - tem0[i]
        else:
            d_data = f01[i, 1] - f01[i, 0]
            d_tem = tem0[i] - tem1[i]
        delta = d_data + 2.0 * lam1 * (s_alt - s_cur) + d_tem
        if delta < 0.0:
            labels[i] = alt
            flips += 1
    return flips


def raster_mesh(sx, sy, invz, uoz, voz, tris, tex, zbuf, color, idbuf, plane_id):
    """Rasterize textured triangles with a 1/z depth buffer.

    sx/sy: screen coords per vertex; invz: 1/z_cam; uoz/voz: texcoord/z.
    tris: (M, 3) int32. tex: (th, tw, 3) float64. zbuf stores 1/z (larger
    is closer) and is updated; color is (H, W, 3) float64; idbuf takes
    plane_id where the mesh wins the depth test.
    """
    h, w = zbuf.shape
    th, tw = tex.shape[:2]
    for t in range(tris.shape[0]):
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        x0, y0 = sx[i0], sy[i0]
        x1, y1 = sx[i1], sy[i1]
        x2, y2 = sx[i2], sy[i2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        minx = max(0, int(np.floor(min(x0, x1, x2))))
        maxx = min(w - 1, int(np.ceil(max(x0, x1, x2))))
        miny = max(0, int(np.floor(min(y0, y1, y2))))
        maxy = min(h - 1, int(np.ceil(max(y0, y1, y2))))
        if minx > maxx or miny > maxy:
            continue
        inv_area = 1.0 / area
        pys = np.arange(miny, maxy + 1, dtype=np.float64)[:, None]
        pxs = np.arange(minx, maxx + 1, dtype=np.float64)[None, :]
        w0 = ((x2 - x1) * (pys - y1) - (y2 - y1) * (pxs - x1)) * inv_area
        w1 = ((x0 - x2) * (pys - y2) - (y0 - y2) * (pxs - x2)) * inv_area
        w2 = ((x1 - x0) * (pys - y0) - (y1 - y0) * (pxs - x0)) * inv_area
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        if not inside.any():
            continue
        iz = (w0 * invz[i0] + w1 * invz[i1]) + w2 * invz[i2]
        zwin = zbuf[miny : maxy + 1, minx : maxx + 1]
        hit = inside & (iz > zwin)
        if not hit.any():
            continue
        uu = ((w0 * uoz[i0] + w1 * uoz[i1]) + w2 * uoz[i2]) / iz
        vv = ((w0 * voz[i0] + w1 * voz[i1]) + w2 * voz[i2]) / iz
        tx = np.clip(uu * (tw - 1), 0.0, tw - 1.0)
        ty = np.clip(vv * (th - 1), 0.0, th - 1.0)
        tx0 = np.minimum(tx.astype(np.int64), max(tw - 2, 0))
        ty0 = np.minimum(ty.astype(np.int64), max(th - 2, 0))
        fx = tx - tx0
        fy = ty - ty0
        tx1 = np.minimum(tx0 + 1, tw - 1)
        ty1 = np.minimum(ty0 + 1, th - 1)
        for ch in range(3):
            c00 = tex[ty0, tx0, ch]
            c10 = tex[ty0, tx1, ch]
            c01 = tex[ty1, tx0, ch]
            c11 = tex[ty1, tx1, ch]
            top = c00 + (c10 - c00) * fx
            bot = c01 + (c11 - c01) * fx
            val = top + (bot - top) * fy
            cwin = color[miny : maxy + 1, minx : maxx + 1, ch]
            cwin[hit] = val[hit]
        zwin[hit] = iz[hit]
        idwin = idbuf[miny : maxy + 1, minx : maxx + 1]
        idwin[hit] = plane_id


def raster_billboard(sx, sy, invz, uoz, voz, tris, tex_rgba, zbuf, color):
    """Alpha-blended quad rasterization; depth-tested, no depth write."""
    h, w = zbuf.shape
    th, tw = tex_rgba.shape[:2]
    for t in range(tris.shape[0]):
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        x0, y0 = sx[i0], sy[i0]
        x1, y1 = sx[i1], sy[i1]
        x2, y2 = sx[i2], sy[i2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        minx = max(0, int(np.floor(min(x0, x1, x2))))
        maxx = min(w - 1, int(np.ceil(max(x0, x1, x2))))
        miny = max(0, int(np.floor(min(y0, y1, y2))))
        maxy = min(h - 1, int(np.ceil(max(y0, y1, y2))))
        if minx > maxx or miny > maxy:
            continue
        inv_area = 1.0 / area
        pys = np.arange(miny, maxy + 1, dtype=np.float64)[:, None]
        pxs = np.arange(minx, maxx + 1, dtype=np.float64)[None, :]
        w0 = ((x2 - x1) * (pys - y1) - (y2 - y1) * (pxs - x1)) * inv_area
        w1 = ((x0 - x2) * (pys - y2) - (y0 - y2) * (pxs - x2)) * inv_area
        w2 = ((x1 - x0) * (pys - y0) - (y1 - y0) * (pxs - x0)) * inv_area
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        if not inside.any():
            continue
        iz = (w0 * invz[i0] + w1 * invz[i1]) + w2 * invz[i2]
        zwin = zbuf[miny : maxy + 1, minx : maxx + 1]
        hit = inside & (iz > zwin)
        if not hit.any():
            continue
        uu = ((w0 * uoz[i0] + w1 * uoz[i1]) + w2 * uoz[i2]) / iz
        vv = ((w0 * voz[i0] + w1 * voz[i1]) + w2 * voz[i2]) / iz
        tx = np.clip(uu * (tw - 1), 0.0, tw - 1.0)
        ty = np.clip(vv * (th - 1), 0.0, th - 1.0)
        tx0 = np.minimum(tx.astype(np.int64), max(tw - 2, 0))
        ty0 = np.minimum(ty.astype(np.int64), max(th - 2, 0))
        fx = tx - tx0
        fy = ty - ty0
        tx1 = np.minimum(tx0 + 1, tw - 1)
        ty1 = np.minimum(ty0 + 1, th - 1)

        def sample(ch):
            c00 = tex_rgba[ty0, tx0, ch]
            c10 = tex_rgba[ty0, tx1, ch]
            c01 = tex_rgba[ty1, tx0, ch]
            c11 = tex_rgba[ty1, tx1, ch]
            top = c00 + (c10 - c00) * fx
            bot = c01 + (c11 - c01) * fx
            return top + (bot - top) * fy

        alpha = sample(3) / 255.0
        for ch in range(3):
            val = sample(ch)
            cwin = color[miny : maxy + 1, minx : maxx + 1, ch]
            blended = cwin * (1.0 - alpha) + val * alpha
            cwin[hit] = blended[hit]


def diffuse_fill(img, hole, iters):
    """Jacobi neighborhood-mean diffusion of hole pixels (in place).

    img: (H, W, 3) float64; hole: (H, W) bool. Non-hole pixels are fixed.
    """
    for _ in range(iters):
        p = np.pad(img, ((1, 1), (1, 1), (0, 0)), mode="edge")
        avg = ((p[:-2, 1:-1] + p[2:, 1:-1]) + (p[1:-1, :-2] + p[1:-1, 2:])) * 0.25
        img[hole] = avg[hole]
    return img
