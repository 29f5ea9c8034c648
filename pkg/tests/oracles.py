"""
Independent reference implementations used only by the tests.

Each one is written the plain, obvious way and shares no code with the
package, so agreement is evidence rather than tautology.
"""
import math

import numpy as np


def dlt_homography(src, dst):
    """Solve the 8 unknowns of a homography (h22 = 1) from 4 correspondences."""
    A, b = [], []
    for (x, y), (X, Y) in zip(src, dst):
        A.append([x, y, 1, 0, 0, 0, -x * X, -y * X])
        b.append(X)
        A.append([0, 0, 0, x, y, 1, -x * Y, -y * Y])
        b.append(Y)
    h = np.linalg.solve(np.array(A, dtype=float), np.array(b, dtype=float))
    return np.append(h, 1.0).reshape(3, 3)


def map_point(H, x, y):
    w = H[2, 0] * x + H[2, 1] * y + H[2, 2]
    return (H[0, 0] * x + H[0, 1] * y + H[0, 2]) / w, (H[1, 0] * x + H[1, 1] * y + H[1, 2]) / w


def bilinear_pixel(img, x, y):
    """Bilinear lookup at index coordinates, clamped to the image."""
    h, w = img.shape[:2]
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    i0, j0 = int(math.floor(x)), int(math.floor(y))
    i1, j1 = min(i0 + 1, w - 1), min(j0 + 1, h - 1)
    fx, fy = x - i0, y - j0
    p = img.astype(float)
    return ((1 - fx) * (1 - fy) * p[j0, i0] + fx * (1 - fy) * p[j0, i1]
            + (1 - fx) * fy * p[j1, i0] + fx * fy * p[j1, i1])


def resample_quad(image, corners, W, H):
    """Per-pixel inverse-mapping crop of a quad into a W x H texture."""
    Hm = dlt_homography([(0, 0), (1, 0), (1, 1), (0, 1)], corners)
    out = np.zeros((H, W, 3))
    for j in range(H):
        for i in range(W):
            x, y = map_point(Hm, (i + 0.5) / W, (j + 0.5) / H)
            out[j, i] = bilinear_pixel(image, x - 0.5, y - 0.5)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def barycentric(p, a, b, c):
    """Barycentric coordinates of p in triangle abc via Cramer's rule."""
    det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    if det == 0:
        return None
    l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det
    l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det
    return 1.0 - l1 - l2, l1, l2


def brute_force_depth(points, depths, triangles, W, H, eps=1e-9):
    """
    Minimum interpolated depth over all triangles covering each pixel center.

    Returns ``(depth, ambiguous)``; ``ambiguous`` marks pixels whose center
    lies within ``eps`` (in barycentric terms) of some triangle edge, where
    the fill convention rather than geometry decides. Vectorised over pixels,
    looped over triangles, barycentrics by Cramer's rule.
    """
    jj, ii = np.mgrid[0:H, 0:W]
    px, py = ii + 0.5, jj + 0.5
    depth = np.full((H, W), np.inf)
    ambiguous = np.zeros((H, W), dtype=bool)
    for tri in triangles:
        a, b, c = (np.asarray(points[k], dtype=float) for k in tri)
        det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        if det == 0:
            continue
        l1 = ((px - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (py - a[1])) / det
        l2 = ((b[0] - a[0]) * (py - a[1]) - (px - a[0]) * (b[1] - a[1])) / det
        l0 = 1.0 - l1 - l2
        lo = np.minimum(np.minimum(l0, l1), l2)
        ambiguous |= np.abs(lo) <= eps
        z = l0 * depths[tri[0]] + l1 * depths[tri[1]] + l2 * depths[tri[2]]
        hit = lo > eps
        depth[hit] = np.minimum(depth[hit], z[hit])
    return depth, ambiguous


def gaussian_kernel(sigma, truncate=3.0):
    radius = int(truncate * sigma + 0.5)
    t = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def smoothed_step(n, edge, sigma):
    """Step (1 for index < edge, else 0) convolved with a sampled Gaussian, edges replicated."""
    k = gaussian_kernel(sigma)
    r = len(k) // 2
    step = (np.arange(n) < edge).astype(float)
    padded = np.concatenate([np.full(r, step[0]), step, np.full(r, step[-1])])
    return np.convolve(padded, k, mode="valid")


def sweep_rates(live, spoof):
    """(FAR, FRR) at a threshold below all scores, at every midpoint, and above all."""
    vals = sorted(set(live) | set(spoof))
    cuts = [vals[0] - 1.0] + [(a + b) / 2.0 for a, b in zip(vals, vals[1:])] + [vals[-1] + 1.0]
    out = []
    for t in cuts:
        far = sum(1 for s in spoof if s >= t) / len(spoof)
        frr = sum(1 for s in live if s < t) / len(live)
        out.append((t, far, frr))
    return out


def sweep_eer(live, spoof):
    """
    Brute-force EER: minimise |FAR - FRR| over the sweep, earliest cut on ties.

    The threshold reported is the score the winning cut stands for: the
    lowest score at or above it (``inf`` past the top), i.e. the operating
    point expressed on the score scale rather than as a midpoint.
    """
    best = None
    for t, far, frr in sweep_rates(live, spoof):
        key = abs(far - frr)
        if best is None or key < best[0]:
            best = (key, t, far, frr)
    _, t, far, frr = best
    above = [v for v in list(live) + list(spoof) if v >= t]
    return (far + frr) / 2.0, (min(above) if above else math.inf)


def apply_cut(live, spoof, t):
    far = sum(1 for s in spoof if s >= t) / len(spoof)
    frr = sum(1 for s in live if s < t) / len(live)
    return far, frr


def sweep_hter(dev_live, dev_spoof, test_live, test_spoof):
    _, t = sweep_eer(dev_live, dev_spoof)
    far, frr = apply_cut(test_live, test_spoof, t)
    return (far + frr) / 2.0, t
