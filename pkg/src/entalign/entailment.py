"""Entailment-cone geometry and the score-modulated hinge loss.

A text point T carries a cone opening toward the ideal boundary; the cone
half-aperture shrinks as T moves away from the origin, so specific concepts
get narrow cones and general ones stay wide. An image point I is "entailed"
by T when the exterior angle at T in the triangle (origin, T, I) does not
exceed the aperture. The supervision signal contracts the aperture for
strongly aligned pairs, turning a scalar alignment score into a geometric
constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidInputError
from .manifold import LorentzPoint, ManifoldConfig, geodesic_distance, require_on_manifold


@dataclass(frozen=True)
class EntailmentConfig:
    """Cone constants.

    k sets the aperture boundary scale; contraction is the maximum fraction
    by which a perfect alignment score narrows a cone; eps guards clamped
    denominators.
    """

    k: float = 0.1
    contraction: float = 0.8
    eps: float = 1e-8

    def __post_init__(self):
        if not self.k > 0:
            raise InvalidInputError(f"k must be positive, got {self.k}")
        if not (0 <= self.contraction < 1):
            raise InvalidInputError(f"contraction must lie in [0, 1), got {self.contraction}")
        if not (0 < self.eps < 1e-3):
            raise InvalidInputError(f"eps must lie in (0, 1e-3), got {self.eps}")


@dataclass(frozen=True)
class GeometricPrimitives:
    """The geometry summary consumed by the regressor.

    distance: geodesic distance between text and image points.
    exterior_angle: angle at the text vertex, in [0, pi].
    aperture: cone half-aperture at the text point, in (0, pi/2].
    dynamic_aperture: aperture after score contraction; equals aperture when
    no score is supplied.
    """

    distance: float
    exterior_angle: float
    aperture: float
    dynamic_aperture: float


def half_aperture(text: LorentzPoint, mcfg: ManifoldConfig, ecfg: EntailmentConfig) -> float:
    """Cone half-aperture arcsin(min(1, 2k / (sqrt(c) * ||space||))).

    The arcsin argument saturates at 1 near the origin, so tiny space norms
    yield the maximal aperture pi/2 instead of an error.
    """
    require_on_manifold(text, mcfg, "text")
    denom = max(mcfg.sqrt_c * text.space_norm(), ecfg.eps)
    arg = min(1.0, 2.0 * ecfg.k / denom)
    return math.asin(arg)


def exterior_angle(
    text: LorentzPoint,
    image: LorentzPoint,
    mcfg: ManifoldConfig,
    ecfg: EntailmentConfig,
) -> float:
    """Exterior angle at the text vertex of the (origin, text, image) triangle.

    With eta = <text, image>_L the angle is
    arccos((image_time + text_time * c * eta) /
           (||text_space|| * sqrt((c*eta)^2 - 1))),
    the argument clamped to [-1, 1] and the radicand floored at eps so that
    coincident or near-lightlike configurations stay defined. Zero means the
    image sits exactly on the cone axis beyond the text.
    """
    require_on_manifold(text, mcfg, "text")
    require_on_manifold(image, mcfg, "image")
    if text.dim != image.dim:
        raise InvalidInputError(f"dimension mismatch: {text.dim} vs {image.dim}")
    q = text.space_norm()
    if q < ecfg.eps:
        raise DegenerateGeometryError(
            "text point at the origin: cone apex direction undefined"
        )
    c = mcfg.curvature
    eta = float(np.dot(text.space, image.space)) - text.time * image.time
    radicand = max(ecfg.eps, (c * eta) ** 2 - 1.0)
    ratio = (image.time + text.time * c * eta) / (q * math.sqrt(radicand))
    return math.acos(min(1.0, max(-1.0, ratio)))


def contraction_factor(score: float, ecfg: EntailmentConfig) -> float:
    """Aperture multiplier 1 - contraction * score for a score in [0, 1]."""
    if not (0.0 <= score <= 1.0):
        raise InvalidInputError(f"score must lie in [0, 1], got {score}")
    return 1.0 - ecfg.contraction * score


def dynamic_aperture(
    text: LorentzPoint, score: float, mcfg: ManifoldConfig, ecfg: EntailmentConfig
) -> float:
    """Score-contracted half-aperture: high scores demand tight cones."""
    return contraction_factor(score, ecfg) * half_aperture(text, mcfg, ecfg)


def entailment_loss(
    text: LorentzPoint,
    image: LorentzPoint,
    score: float,
    mcfg: ManifoldConfig,
    ecfg: EntailmentConfig,
) -> float:
    """Hinge penalty max(0, exterior_angle - dynamic_aperture).

    Zero exactly when the image lies inside the score-contracted cone;
    non-decreasing in the score for a fixed pair of points.
    """
    phi = exterior_angle(text, image, mcfg, ecfg)
    return max(0.0, phi - dynamic_aperture(text, score, mcfg, ecfg))


def geometric_primitives(
    text: LorentzPoint,
    image: LorentzPoint,
    score: float | None,
    mcfg: ManifoldConfig,
    ecfg: EntailmentConfig,
) -> GeometricPrimitives:
    """Bundle distance, exterior angle and apertures for one pair.

    Without a score (inference) the dynamic aperture equals the static one.
    """
    aperture = half_aperture(text, mcfg, ecfg)
    dyn = aperture if score is None else contraction_factor(score, ecfg) * aperture
    return GeometricPrimitives(
        distance=geodesic_distance(text, image, mcfg),
        exterior_angle=exterior_angle(text, image, mcfg, ecfg),
        aperture=aperture,
        dynamic_aperture=dyn,
    )
