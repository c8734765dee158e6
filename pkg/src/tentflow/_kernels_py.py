"""Pure-numpy versions of the compiled kernels (same signatures and results)."""

import numpy as np


def _flat_indices(centers, offsets, n):
    dim = centers.shape[1]
    pos = (centers[:, None, :] + offsets[None, :, :]) % n
    idx = np.zeros(pos.shape[:2], dtype=np.int64)
    for d in range(dim):
        idx = idx * n + pos[..., d]
    return idx


def ball_sums(values, centers, offsets, weights, n):
    values = np.ascontiguousarray(values, dtype=np.float64)
    idx = _flat_indices(np.asarray(centers), np.asarray(offsets), n)
    out = np.empty((values.shape[0], idx.shape[0]))
    # chunk over centers to bound the gathered temporary
    step = max(1, int(4e6 // max(1, values.shape[0] * idx.shape[1])))
    for c0 in range(0, idx.shape[0], step):
        sub = idx[c0 : c0 + step]
        out[:, c0 : c0 + step] = values[:, sub] @ weights
    return out


def pair_difference_sum(f, coords, weights, alpha):
    f = np.asarray(f, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    dim = coords.shape[1]
    expo = 0.5 * (dim + 2.0 * alpha)
    total = 0.0
    block = 512
    for i0 in range(0, f.size, block):
        xi = coords[i0 : i0 + block]
        r2 = np.sum((xi[:, None, :] - coords[None, :, :]) ** 2, axis=-1)
        diff = (f[i0 : i0 + block, None] - f[None, :]) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            kern = np.where(r2 > 0, r2 ** (-expo), 0.0)
        total += float(np.sum(weights[i0 : i0 + block, None] * weights[None, :] * diff * kern))
    return total


def interp_periodic(field, points, n):
    field = np.asarray(field, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    dim = points.shape[1]
    base = np.floor(points)
    frac = points - base
    base = base.astype(np.int64) % n
    out = np.zeros(points.shape[0])
    for corner in range(1 << dim):
        w = np.ones(points.shape[0])
        idx = np.zeros(points.shape[0], dtype=np.int64)
        for d in range(dim):
            if (corner >> d) & 1:
                w = w * frac[:, d]
                idx = idx * n + (base[:, d] + 1) % n
            else:
                w = w * (1.0 - frac[:, d])
                idx = idx * n + base[:, d]
        out += w * field[idx]
    return out
