"""Independent oracles and generators shared by the tests.

Nothing here calls into the package's solver path; the dense system is
assembled pixel by pixel and solved by textbook Gaussian elimination.
"""

from pathlib import Path

import numpy as np

FIXTURES = Path(__file__).parent / "fixtures"
DATASET = FIXTURES / "dataset"


def gaussian_elimination(A, b):
    """Solve Ax = b with partial pivoting; plain loops over rows."""
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = len(b)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(A[k:, k])))
        if piv != k:
            A[[k, piv]] = A[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        for i in range(k + 1, n):
            f = A[i, k] / A[k, k]
            if f != 0.0:
                A[i, k:] -= f * A[k, k:]
                b[i] -= f * b[k]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - A[i, i + 1:] @ x[i + 1:]) / A[i, i]
    return x


def dense_system(target, mask, div=None):
    """Dense 5-point Dirichlet system over ``mask``, built pixel by pixel.

    ``div`` holds one guidance value per member in row-major order.
    """
    h, w = mask.shape
    members = [(r, c) for r in range(h) for c in range(w) if mask[r, c]]
    idx = {p: i for i, p in enumerate(members)}
    n = len(members)
    A = np.zeros((n, n))
    b = np.zeros(n) if div is None else np.array(div, dtype=float)
    for i, (r, c) in enumerate(members):
        A[i, i] = 4.0
        for q in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if q in idx:
                A[i, idx[q]] = -1.0
            else:
                b[i] += target[q]
    return A, b, members


def dense_solve(target, mask, div=None):
    A, b, members = dense_system(target, mask, div)
    return gaussian_elimination(A, b), members


def laplacian_at(values, r, c):
    return 4 * values[r, c] - values[r - 1, c] - values[r + 1, c] - values[r, c - 1] - values[r, c + 1]


def random_region(rng, shape, max_size, box=None, blobs=1):
    """Random interior region grown by 4-connected accretion.

    ``box = (r0, c0, r1, c1)`` (inclusive) confines the growth; it defaults to
    the whole interior. Several blobs may give a disconnected region.
    """
    h, w = shape
    r0, c0, r1, c1 = box if box is not None else (1, 1, h - 2, w - 2)
    mask = np.zeros(shape, dtype=bool)
    budget = int(rng.integers(1, max_size + 1))
    size = 0
    for b in range(blobs):
        if size >= budget:
            break
        seed = (int(rng.integers(r0, r1 + 1)), int(rng.integers(c0, c1 + 1)))
        goal = budget if b == blobs - 1 else min(budget, size + max(1, budget // blobs))
        if not mask[seed]:
            mask[seed] = True
            size += 1
        candidates = set()

        def add_neighbours(p):
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                q = (p[0] + dr, p[1] + dc)
                if r0 <= q[0] <= r1 and c0 <= q[1] <= c1 and not mask[q]:
                    candidates.add(q)

        add_neighbours(seed)
        while size < goal and candidates:
            q = sorted(candidates)[int(rng.integers(len(candidates)))]
            candidates.discard(q)
            if mask[q]:
                continue
            mask[q] = True
            size += 1
            add_neighbours(q)
    return mask


def disk_mask(shape, center, radius):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    return (xx - center[0]) ** 2 + (yy - center[1]) ** 2 <= radius ** 2


def boundary_values(image, mask):
    """Target values on the outer 4-neighbour ring of ``mask``."""
    h, w = mask.shape
    out = []
    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                continue
            if any(0 <= r + dr < h and 0 <= c + dc < w and mask[r + dr, c + dc]
                   for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))):
                out.append(image[r, c])
    return np.array(out)


def rasterized_area(square_side, scale, rotation=0.0, grow=0.0):
    """Pixel centres inside a scaled/rotated square of ``square_side`` pixels.

    The square is centred on a pixel corner and its half-width is widened by
    ``grow`` (negative shrinks). Any rasterizer whose boundary error stays
    under half a pixel diagonal lands between ``grow=-0.71`` and ``grow=+0.71``.
    """
    half = square_side * scale / 2.0 + grow
    t = np.radians(rotation)
    n = int(np.ceil(2 * abs(half))) + 4
    coords = np.arange(-n, n + 1, dtype=float) + 0.5
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    u = np.cos(t) * xx - np.sin(t) * yy
    v = np.sin(t) * xx + np.cos(t) * yy
    return int(((np.abs(u) < half) & (np.abs(v) < half)).sum())
