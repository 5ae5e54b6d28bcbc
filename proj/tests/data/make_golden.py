"""Regenerates the warp golden files with a numpy re-implementation.

Written independently of the C++ sampler: dense coordinates come from
bilinear interpolation of the control points themselves, and sampling walks
the four neighbours with the tent kernel.

    python3 tests/data/make_golden.py
"""
import os

import numpy as np
from PIL import Image

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(os.path.dirname(HERE))


def pattern(size=32):
    y, x = np.mgrid[0:size, 0:size]
    r = (x * 255) // (size - 1)
    g = (y * 255) // (size - 1)
    b = np.where(((x // 4) + (y // 4)) % 2 == 0, 230, 25)
    return np.stack([r, g, b], axis=-1).astype(np.uint8)


def read_grid(path):
    rows = [l.split() for l in open(path) if l.strip() and not l.lstrip().startswith("#")]
    k = int(rows[0][0])
    pts = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=np.float64)
    return pts.reshape(k, k, 2)


def dense_field(grid, h, w):
    k = grid.shape[0]
    field = np.zeros((h, w, 2))
    for i in range(h):
        ty = i / (h - 1) * (k - 1)
        a = min(int(np.floor(ty)), k - 2)
        fy = ty - a
        for j in range(w):
            tx = j / (w - 1) * (k - 1)
            b = min(int(np.floor(tx)), k - 2)
            fx = tx - b
            field[i, j] = ((1 - fy) * (1 - fx) * grid[a, b] + (1 - fy) * fx * grid[a, b + 1]
                           + fy * (1 - fx) * grid[a + 1, b] + fy * fx * grid[a + 1, b + 1])
    return field


def sample(img, field):
    c, h, w = img.shape
    out = np.zeros_like(img)
    for i in range(h):
        for j in range(w):
            u = (field[i, j, 0] + 1) * (w - 1) / 2
            v = (field[i, j, 1] + 1) * (h - 1) / 2
            for yy in (int(np.floor(v)), int(np.floor(v)) + 1):
                for xx in (int(np.floor(u)), int(np.floor(u)) + 1):
                    wt = max(0.0, 1 - abs(u - xx)) * max(0.0, 1 - abs(v - yy))
                    if 0 <= xx < w and 0 <= yy < h and wt > 0:
                        out[:, i, j] += wt * img[:, yy, xx]
    return out


def to_float(u8):
    f = u8.astype(np.float32).transpose(2, 0, 1)
    return f / np.float32(127.5) - np.float32(1)


def to_u8(f):
    f = np.clip(f.astype(np.float32), -1, 1)
    return np.floor((f + np.float32(1)) * np.float32(127.5) + 0.5).astype(np.uint8).transpose(1, 2, 0)


def main():
    src = pattern()
    Image.fromarray(src).save(os.path.join(HERE, "warp_input.png"))
    grid = read_grid(os.path.join(ROOT, "docs", "corner_pull_grid.txt"))
    img = to_float(src).astype(np.float64)
    out = sample(img, dense_field(grid, img.shape[1], img.shape[2]))
    Image.fromarray(to_u8(out)).save(os.path.join(HERE, "warp_corner_pull_golden.png"))


if __name__ == "__main__":
    main()
