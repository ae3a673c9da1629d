"""Numba-compiled twins of the kernels in `_numpy.py`.

Scalar loops mirror the numpy expressions operation-for-operation so both
paths produce identical bits. No parallel execution: determinism first.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def slic_iterate(lab, seed_xy, seed_lab, step, ratio, n_iters):
    h, w = lab.shape[:2]
    k = seed_xy.shape[0]
    half = int(np.ceil(step)) + 1
    cx = seed_xy[:, 0].copy()
    cy = seed_xy[:, 1].copy()
    clab = seed_lab.copy()
    labels = np.full((h, w), -1, dtype=np.int32)
    dist = np.empty((h, w), dtype=np.float64)
    for _ in range(n_iters):
        dist[:, :] = np.inf
        labels[:, :] = -1
        for kk in range(k):
            rc = int(np.floor(cy[kk] + 0.5))
            cc = int(np.floor(cx[kk] + 0.5))
            r0 = max(0, rc - half)
            r1 = min(h, rc + half + 1)
            c0 = max(0, cc - half)
            c1 = min(w, cc + half + 1)
            if r0 >= r1 or c0 >= c1:
                continue
            sl = clab[kk, 0]
            sa = clab[kk, 1]
            sb = clab[kk, 2]
            for r in range(r0, r1):
                dy = float(r) - cy[kk]
                for c in range(c0, c1):
                    dl = lab[r, c, 0] - sl
                    da = lab[r, c, 1] - sa
                    db = lab[r, c, 2] - sb
                    dx = float(c) - cx[kk]
                    d = ((dl * dl + da * da) + db * db) + ratio * (dy * dy + dx * dx)
                    if d < dist[r, c]:
                        dist[r, c] = d
                        labels[r, c] = kk
        for r in range(h):
            for c in range(w):
                if labels[r, c] < 0:
                    best = 0
                    best_d = np.inf
                    for kk in range(k):
                        dy = float(r) - cy[kk]
                        dx = float(c) - cx[kk]
                        d = dy * dy + dx * dx
                        if d < best_d:
                            best_d = d
                            best = kk
                    labels[r, c] = best
        counts = np.zeros(k, dtype=np.float64)
        sums_x = np.zeros(k, dtype=np.float64)
        sums_y = np.zeros(k, dtype=np.float64)
        sums_lab = np.zeros((k, 3), dtype=np.float64)
        for r in range(h):
            for c in range(w):
                kk = labels[r, c]
                counts[kk] += 1.0
                sums_x[kk] += float(c)
                sums_y[kk] += float(r)
                sums_lab[kk, 0] += lab[r, c, 0]
                sums_lab[kk, 1] += lab[r, c, 1]
                sums_lab[kk, 2] += lab[r, c, 2]
        for kk in range(k):
            if counts[kk] > 0:
                cx[kk] = sums_x[kk] / counts[kk]
                cy[kk] = sums_y[kk] / counts[kk]
                clab[kk, 0] = sums_lab[kk, 0] / counts[kk]
                clab[kk, 1] = sums_lab[kk, 1] / counts[kk]
                clab[kk, 2] = sums_lab[kk, 2] / counts[kk]
    centers_xy = np.empty((k, 2), dtype=np.float64)
    centers_xy[:, 0] = cx
    centers_xy[:, 1] = cy
    return labels, centers_xy, clab


@njit(cache=True)
def label_components(labels):
    h, w = labels.shape
    comp = np.full((h, w), -1, dtype=np.int32)
    stack = np.empty(h * w, dtype=np.int64)
    n = 0
    flat_labels = labels.ravel()
    flat_comp = comp.ravel()
    for start in range(h * w):
        if flat_comp[start] >= 0:
            continue
        value = flat_labels[start]
        top = 0
        stack[top] = start
        top += 1
        flat_comp[start] = n
        while top > 0:
            top -= 1
            idx = stack[top]
            r = idx // w
            c = idx - r * w
            if r > 0 and flat_comp[idx - w] < 0 and flat_labels[idx - w] == value:
                flat_comp[idx - w] = n
                stack[top] = idx - w
                top += 1
            if r + 1 < h and flat_comp[idx + w] < 0 and flat_labels[idx + w] == value:
                flat_comp[idx + w] = n
                stack[top] = idx + w
                top += 1
            if c > 0 and flat_comp[idx - 1] < 0 and flat_labels[idx - 1] == value:
                flat_comp[idx - 1] = n
                stack[top] = idx - 1
                top += 1
            if c + 1 < w and flat_comp[idx + 1] < 0 and flat_labels[idx + 1] == value:
                flat_comp[idx + 1] = n
                stack[top] = idx + 1
                top += 1
        n += 1
    return comp, n


@njit(cache=True)
def hs_solve(ix, iy, it, alpha2, iters):
    h, w = ix.shape
    u = np.zeros((h, w), dtype=np.float64)
    v = np.zeros((h, w), dtype=np.float64)
    un = np.empty((h, w), dtype=np.float64)
    vn = np.empty((h, w), dtype=np.float64)
    denom = np.empty((h, w), dtype=np.float64)
    for r in range(h):
        for c in range(w):
            denom[r, c] = alpha2 + (ix[r, c] * ix[r, c] + iy[r, c] * iy[r, c])
    for _ in range(iters):
        for r in range(h):
            rm = r - 1 if r > 0 else 0
            rp = r + 1 if r + 1 < h else h - 1
            for c in range(w):
                cm = c - 1 if c > 0 else 0
                cp = c + 1 if c + 1 < w else w - 1
                ubar = ((u[rm, c] + u[rp, c]) + (u[r, cm] + u[r, cp])) * 0.25
                vbar = ((v[rm, c] + v[rp, c]) + (v[r, cm] + v[r, cp])) * 0.25
                t = (ix[r, c] * ubar + iy[r, c] * vbar + it[r, c]) / denom[r, c]
                un[r, c] = ubar - ix[r, c] * t
                vn[r, c] = vbar - iy[r, c] * t
        u, un = un, u
        v, vn = vn, v
    return u, v


@njit(cache=True)
def mrf_sweep(labels, f01, indptr, indices, weights, tem0, tem1, lam1):
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


@njit(cache=True)
def raster_mesh(sx, sy, invz, uoz, voz, tris, tex, zbuf, color, idbuf, plane_id):
    h, w = zbuf.shape
    th, tw = tex.shape[:2]
    tx_hi = max(tw - 2, 0)
    ty_hi = max(th - 2, 0)
    for t in range(tris.shape[0]):
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        x0, y0 = sx[i0], sy[i0]
        x1, y1 = sx[i1], sy[i1]
        x2, y2 = sx[i2], sy[i2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        minx = max(0, int(np.floor(min(x0, min(x1, x2)))))
        maxx = min(w - 1, int(np.ceil(max(x0, max(x1, x2)))))
        miny = max(0, int(np.floor(min(y0, min(y1, y2)))))
        maxy = min(h - 1, int(np.ceil(max(y0, max(y1, y2)))))
        if minx > maxx or miny > maxy:
            continue
        inv_area = 1.0 / area
        for py in range(miny, maxy + 1):
            fy_ = float(py)
            for px in range(minx, maxx + 1):
                fx_ = float(px)
                w0 = ((x2 - x1) * (fy_ - y1) - (y2 - y1) * (fx_ - x1)) * inv_area
                w1 = ((x0 - x2) * (fy_ - y2) - (y0 - y2) * (fx_ - x2)) * inv_area
                w2 = ((x1 - x0) * (fy_ - y0) - (y1 - y0) * (fx_ - x0)) * inv_area
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                iz = (w0 * invz[i0] + w1 * invz[i1]) + w2 * invz[i2]
                if iz <= zbuf[py, px]:
                    continue
                uu = ((w0 * uoz[i0] + w1 * uoz[i1]) + w2 * uoz[i2]) / iz
                vv = ((w0 * voz[i0] + w1 * voz[i1]) + w2 * voz[i2]) / iz
                tx = min(max(uu * (tw - 1), 0.0), tw - 1.0)
                ty = min(max(vv * (th - 1), 0.0), th - 1.0)
                tx0 = min(int(tx), tx_hi)
                ty0 = min(int(ty), ty_hi)
                fx = tx - tx0
                fy = ty - ty0
                tx1 = min(tx0 + 1, tw - 1)
                ty1 = min(ty0 + 1, th - 1)
                for ch in range(3):
                    c00 = tex[ty0, tx0, ch]
                    c10 = tex[ty0, tx1, ch]
                    c01 = tex[ty1, tx0, ch]
                    c11 = tex[ty1, tx1, ch]
                    top = c00 + (c10 - c00) * fx
                    bot = c01 + (c11 - c01) * fx
                    color[py, px, ch] = top + (bot - top) * fy
                zbuf[py, px] = iz
                idbuf[py, px] = plane_id


@njit(cache=True)
def raster_billboard(sx, sy, invz, uoz, voz, tris, tex_rgba, zbuf, color):
    h, w = zbuf.shape
    th, tw = tex_rgba.shape[:2]
    tx_hi = max(tw - 2, 0)
    ty_hi = max(th - 2, 0)
    for t in range(tris.shape[0]):
        i0, i1, i2 = tris[t, 0], tris[t, 1], tris[t, 2]
        x0, y0 = sx[i0], sy[i0]
        x1, y1 = sx[i1], sy[i1]
        x2, y2 = sx[i2], sy[i2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        minx = max(0, int(np.floor(min(x0, min(x1, x2)))))
        maxx = min(w - 1, int(np.ceil(max(x0, max(x1, x2)))))
        miny = max(0, int(np.floor(min(y0, min(y1, y2)))))
        maxy = min(h - 1, int(np.ceil(max(y0, max(y1, y2)))))
        if minx > maxx or miny > maxy:
            continue
        inv_area = 1.0 / area
        for py in range(miny, maxy + 1):
            fy_ = float(py)
            for px in range(minx, maxx + 1):
                fx_ = float(px)
                w0 = ((x2 - x1) * (fy_ - y1) - (y2 - y1) * (fx_ - x1)) * inv_area
                w1 = ((x0 - x2) * (fy_ - y2) - (y0 - y2) * (fx_ - x2)) * inv_area
                w2 = ((x1 - x0) * (fy_ - y0) - (y1 - y0) * (fx_ - x0)) * inv_area
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                iz = (w0 * invz[i0] + w1 * invz[i1]) + w2 * invz[i2]
                if iz <= zbuf[py, px]:
                    continue
                uu = ((w0 * uoz[i0] + w1 * uoz[i1]) + w2 * uoz[i2]) / iz
                vv = ((w0 * voz[i0] + w1 * voz[i1]) + w2 * voz[i2]) / iz
                tx = min(max(uu * (tw - 1), 0.0), tw - 1.0)
                ty = min(max(vv * (th - 1), 0.0), th - 1.0)
                tx0 = min(int(tx), tx_hi)
                ty0 = min(int(ty), ty_hi)
                fx = tx - tx0
                fy = ty - ty0
                tx1 = min(tx0 + 1, tw - 1)
                ty1 = min(ty0 + 1, th - 1)
                a00 = tex_rgba[ty0, tx0, 3]
                a10 = tex_rgba[ty0, tx1, 3]
                a01 = tex_rgba[ty1, tx0, 3]
                a11 = tex_rgba[ty1, tx1, 3]
                atop = a00 + (a10 - a00) * fx
                abot = a01 + (a11 - a01) * fx
                alpha = (atop + (abot - atop) * fy) / 255.0
                for ch in range(3):
                    c00 = tex_rgba[ty0, tx0, ch]
                    c10 = tex_rgba[ty0, tx1, ch]
                    c01 = tex_rgba[ty1, tx0, ch]
                    c11 = tex_rgba[ty1, tx1, ch]
                    top = c00 + (c10 - c00) * fx
                    bot = c01 + (c11 - c01) * fx
                    val = top + (bot - top) * fy
                    color[py, px, ch] = color[py, px, ch] * (1.0 - alpha) + val * alpha


@njit(cache=True)
def diffuse_fill(img, hole, iters):
    h, w = img.shape[:2]
    buf = np.empty((h, w, 3), dtype=np.float64)
    for _ in range(iters):
        for r in range(h):
            rm = r - 1 if r > 0 else 0
            rp = r + 1 if r + 1 < h else h - 1
            for c in range(w):
                if not hole[r, c]:
                    continue
                cm = c - 1 if c > 0 else 0
                cp = c + 1 if c + 1 < w else w - 1
                for ch in range(3):
                    buf[r, c, ch] = (
                        (img[rm, c, ch] + img[rp, c, ch])
                        + (img[r, cm, ch] + img[r, cp, ch])
                    ) * 0.25
        for r in range(h):
            for c in range(w):
                if hole[r, c]:
                    for ch in range(3):
                        img[r, c, ch] = buf[r, c, ch]
    return img
