"""Independent reference implementations used only by the tests.

These are straight-line transcriptions that share no code with the
package's vectorized paths.
"""

from fractions import Fraction

import numpy as np

# window[row][col] -> I_k, written out position by position
def ring_literal(window):
    w = [[int(v) for v in row] for row in window]
    return {
        "c": w[1][1],
        1: w[1][2],
        2: w[2][2],
        3: w[2][1],
        4: w[2][0],
        5: w[1][0],
        6: w[0][0],
        7: w[0][1],
        8: w[0][2],
    }


def closed_form_adjacent(k):
    """Closed-form modular index arithmetic for odd and even k."""
    if k in (1, 3, 5, 7):
        return [1 + (k + 5) % 7, 1 + (k + 6) % 9, k + 1, (k + 2) % 8]
    if k in (2, 4, 6, 8):
        return [k - 1, (k + 1) % 8 if (k + 1) % 8 != 0 else 8]
    raise ValueError(k)


def lbp_literal(window):
    I = ring_literal(window)
    code = 0
    for m in range(1, 9):
        phi = 1 if I[m] >= I["c"] else 0
        code += 2 ** (m - 1) * phi
    return code


def flnip_literal(window):
    I = {key: v + 1 for key, v in ring_literal(window).items()}  # [0,255] -> [1,256]
    code = 0
    for k in range(1, 9):
        alpha = [I[idx] for idx in closed_form_adjacent(k)]
        M = len(alpha)
        # (1/M) * sum |a - ref| / ref, kept exact as a single rational
        mu_k = Fraction(sum(abs(a - I[k]) for a in alpha), M * I[k])
        mu_c = Fraction(sum(abs(a - I["c"]) for a in alpha), M * I["c"])
        bit = 1 if mu_k >= mu_c else 0
        code += 2 ** (k - 1) * bit
    return code


def pattern_map_brute(pixels, coder):
    px = np.asarray(pixels)
    h, w = px.shape
    out = np.zeros((h - 2, w - 2), dtype=np.int64)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            out[y - 1, x - 1] = coder(px[y - 1 : y + 2, x - 1 : x + 2])
    return out


def gaussian_1d(sigma, radius):
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(xs**2) / (2 * sigma**2))
    return g / g.sum()


def separable_filter(pixels, sigma, radius):
    """Two-pass convolution with replicate borders, rounded half-to-even."""
    g = gaussian_1d(sigma, radius)
    px = np.asarray(pixels, dtype=np.float64)
    h, w = px.shape
    rows = np.empty_like(px)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i, dx in enumerate(range(-radius, radius + 1)):
                acc += g[i] * px[y, min(max(x + dx, 0), w - 1)]
            rows[y, x] = acc
    out = np.empty_like(px)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i, dy in enumerate(range(-radius, radius + 1)):
                acc += g[i] * rows[min(max(y + dy, 0), h - 1), x]
            out[y, x] = acc
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def d1_literal(a, b):
    return sum(abs((x - y) / (1 + x + y)) for x, y in zip(a, b))
