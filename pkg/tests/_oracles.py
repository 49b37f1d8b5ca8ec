"""Independent reference implementations used only to check the package.

Everything here is deliberately self-contained: the oracles must not share
code with the implementation paths they validate.
"""

from __future__ import annotations

import math

import numpy as np


def law_of_cosines_exterior(text_vec: np.ndarray, image_vec: np.ndarray, c: float) -> float:
    """Exterior angle at the text vertex from side lengths only.

    Computes the three side lengths of the (origin, text, image) geodesic
    triangle, recovers the interior angle at the text vertex from the
    hyperbolic law of cosines, and returns pi minus it.
    """
    sc = math.sqrt(c)

    def inner(a, b):
        return float(np.dot(a[1:], b[1:])) - a[0] * b[0]

    def dist(a, b):
        return math.acosh(max(1.0, -c * inner(a, b))) / sc

    o = np.zeros_like(text_vec)
    o[0] = 1.0 / sc
    side_a = dist(o, text_vec)
    side_b = dist(text_vec, image_vec)
    side_c = dist(o, image_vec)
    denom = math.sinh(sc * side_a) * math.sinh(sc * side_b)
    cos_interior = (
        math.cosh(sc * side_a) * math.cosh(sc * side_b) - math.cosh(sc * side_c)
    ) / denom
    interior = math.acos(max(-1.0, min(1.0, cos_interior)))
    return math.pi - interior


def triangle_sides(text_vec: np.ndarray, image_vec: np.ndarray, c: float) -> tuple[float, float, float]:
    sc = math.sqrt(c)

    def inner(a, b):
        return float(np.dot(a[1:], b[1:])) - a[0] * b[0]

    def dist(a, b):
        return math.acosh(max(1.0, -c * inner(a, b))) / sc

    o = np.zeros_like(text_vec)
    o[0] = 1.0 / sc
    return dist(o, text_vec), dist(text_vec, image_vec), dist(o, image_vec)


def random_hyperboloid_point(rng: np.random.Generator, c: float, dim: int,
                             radius_lo: float, radius_hi: float) -> np.ndarray:
    """Point at a uniform arc radius in a uniform direction, as a (d+1)-vector."""
    sc = math.sqrt(c)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    r = rng.uniform(radius_lo, radius_hi)
    vec = np.empty(dim + 1)
    vec[0] = math.cosh(sc * r) / sc
    vec[1:] = (math.sinh(sc * r) / sc) * direction
    return vec


def brute_force_ranks(values) -> np.ndarray:
    """rank_i = #(x_j < x_i) + (#(x_j == x_i) + 1) / 2, by direct counting."""
    out = []
    for v in values:
        less = sum(1 for u in values if u < v)
        eq = sum(1 for u in values if u == v)
        out.append(less + (eq + 1) / 2.0)
    return np.array(out, dtype=np.float64)


def pearson_direct(a, b) -> float:
    """Covariance over product of standard deviations, written out."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da = a - a.mean()
    db = b - b.mean()
    return float((da * db).sum()) / math.sqrt(float((da * da).sum()) * float((db * db).sum()))


def spearman_brute(pred, gt) -> float:
    return pearson_direct(brute_force_ranks(pred), brute_force_ranks(gt))


def central_differences(f, theta: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Per-coordinate central finite differences of a scalar function."""
    grad = np.zeros_like(theta)
    for i in range(len(theta)):
        plus = theta.copy()
        plus[i] += h
        minus = theta.copy()
        minus[i] -= h
        grad[i] = (f(plus) - f(minus)) / (2.0 * h)
    return grad
