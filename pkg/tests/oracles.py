"""Independent scalar reference implementations used as test oracles.

Nothing here imports ``fitzaudit``. YCbCr and the skin rule use exact
rational arithmetic; LAB uses the textbook chain with ``math.pow``.
"""

from fractions import Fraction as F
import math

# --- YCbCr / skin rule (exact) ----------------------------------------------


def ycbcr(r, g, b):
    y = F("0.299") * r + F("0.587") * g + F("0.114") * b
    cb = 128 - F("0.168736") * r - F("0.331264") * g + F("0.5") * b
    cr = 128 + F("0.5") * r - F("0.418688") * g - F("0.081312") * b
    return y, cb, cr


def is_skin(r, g, b, a):
    if not (r > 95 and r > g and r > b and g > 40 and b > 20 and abs(r - g) > 15 and a > 15):
        return False
    return chroma_ok(r, g, b)


def chroma_ok(r, g, b):
    _, cb, cr = ycbcr(r, g, b)
    return (
        cr > 135
        and cr >= F("0.3448") * cb + F("76.2069")
        and cr >= F("-4.5652") * cb + F("234.5652")
        and cr <= F("-1.15") * cb + F("301.75")
        and cr <= F("-2.2857") * cb + F("432.85")
    )


# --- LAB --------------------------------------------------------------------

M = (
    (0.412453, 0.357580, 0.180423),
    (0.212671, 0.715160, 0.072169),
    (0.019334, 0.119193, 0.950227),
)
WHITE = (0.95047, 1.0, 1.08883)


def _lin(v):
    c = v / 255.0
    if c <= 0.04045:
        return c / 12.92
    return math.pow((c + 0.055) / 1.055, 2.4)


def _f(t):
    d = 6.0 / 29.0
    if t > d ** 3:
        return math.pow(t, 1.0 / 3.0)
    return t / (3 * d * d) + 4.0 / 29.0


def lab(r, g, b):
    rl, gl, bl = _lin(r), _lin(g), _lin(b)
    x, y, z = (row[0] * rl + row[1] * gl + row[2] * bl for row in M)
    fx, fy, fz = _f(x / WHITE[0]), _f(y / WHITE[1]), _f(z / WHITE[2])
    return 116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)


# --- trimmed mean / ITA -------------------------------------------------------


def trimmed(values):
    n = len(values)
    mu = math.fsum(values) / n
    sd = math.sqrt(math.fsum((v - mu) ** 2 for v in values) / n)
    kept = [v for v in values if abs(v - mu) <= sd]
    if not kept:
        best = min(abs(v - mu) for v in values)
        kept = [v for v in values if abs(v - mu) == best]
    return math.fsum(kept) / len(kept), len(kept)


def ita(pixels, masked=False):
    """``pixels``: list of (r, g, b, a). Returns (ita_degrees, fallback)."""
    chosen = [p for p in pixels if is_skin(*p)] if masked else list(pixels)
    fallback = masked and not chosen
    if fallback:
        chosen = list(pixels)
    labs = [lab(p[0], p[1], p[2]) for p in chosen]
    l_mean, _ = trimmed([t[0] for t in labs])
    b_mean, _ = trimmed([t[2] for t in labs])
    if b_mean == 0:
        return (90.0 if l_mean > 50 else -90.0 if l_mean < 50 else 0.0), fallback
    return math.degrees(math.atan((l_mean - 50) / b_mean)), fallback


def fitz(ita_value, scheme):
    if scheme == "kinyanjui":
        bands = [(55, 1), (41, 2), (28, 3), (19, 4), (10, 5)]
    else:
        bands = [(40, 1), (23, 2), (12, 3), (0, 4), (-25, 5)]
    for bound, t in bands:
        if ita_value > bound:
            return t
    return 6


# --- counting metrics ------------------------------------------------------------


def topk(truth, ranked, k):
    """truth: list of labels; ranked: list of ranked-label lists."""
    hits = 0
    for t, r in zip(truth, ranked):
        for j in range(min(k, len(r))):
            if r[j] == t:
                hits += 1
                break
    return hits


def confusion(truth, top1, labels):
    return [[sum(1 for t, p in zip(truth, top1) if t == a and p == b) for b in labels] for a in labels]
