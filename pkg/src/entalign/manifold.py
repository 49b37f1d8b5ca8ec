"""Lorentz-model hyperbolic geometry kernel.

Points live on the upper sheet of the hyperboloid {x : c * <x, x>_L = -1}
embedded in (d+1)-dimensional Minkowski space. The first coordinate is the
time component, the remaining d coordinates the space components; on the
manifold the time component is determined by the space components,
time = sqrt(1/c + ||space||^2).

All geometry is computed in double precision regardless of how embeddings
are stored: the inverse hyperbolic functions near their domain boundaries
amplify single-precision error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .util import as_float_vector, require_finite, sigmoid

# Relative tolerance for the on-manifold membership check, and the residual
# tolerance |c*<x,x>_L + 1| accepted before an input is rejected.
ON_MANIFOLD_RTOL = 1e-6
ON_MANIFOLD_RESIDUAL = 1e-5

# Below this tangent norm the exponential map returns the base point exactly;
# sinh(t)/t is 0/0 at t = 0 and the limit is the identity on space components.
ZERO_TANGENT_NORM = 1e-12


@dataclass(frozen=True)
class ManifoldConfig:
    """Fixed geometry constants.

    curvature is the positive constant c scaling the hyperboloid; it is a
    configuration value, not a trainable parameter. eps guards clamped
    denominators elsewhere in the pipeline.
    """

    curvature: float = 1.0
    eps: float = 1e-8

    def __post_init__(self):
        if not self.curvature > 0:
            raise InvalidInputError(f"curvature must be positive, got {self.curvature}")
        if not (0 < self.eps < 1e-3):
            raise InvalidInputError(f"eps must lie in (0, 1e-3), got {self.eps}")

    @property
    def sqrt_c(self) -> float:
        return math.sqrt(self.curvature)


@dataclass(frozen=True)
class LorentzPoint:
    """A point on the hyperboloid, split into time and space components."""

    time: float
    space: np.ndarray

    @property
    def dim(self) -> int:
        return self.space.shape[0]

    def as_vector(self) -> np.ndarray:
        """The full (d+1)-vector [time, space...]."""
        return np.concatenate(([self.time], self.space))

    def space_norm(self) -> float:
        return float(np.linalg.norm(self.space))


@dataclass(frozen=True)
class TangentAtOrigin:
    """A tangent vector at the origin; the implied (d+1)-vector is [0, space].

    The time slot is zero by construction, so Lorentz-orthogonality to the
    origin holds exactly.
    """

    space: np.ndarray

    @property
    def dim(self) -> int:
        return self.space.shape[0]

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([0.0], self.space))

    def lorentz_norm(self) -> float:
        # For [0, w] the Lorentz norm reduces to the Euclidean norm of w.
        return float(np.linalg.norm(self.space))


@dataclass
class AdaptiveScaler:
    """Trainable pre-lift scaling of Euclidean features.

    The effective scale is logistic(raw) * alpha_max, so it stays inside
    (0, alpha_max) for every raw value and is monotone in raw.
    """

    raw: float = 0.0
    alpha_max: float = 1.0

    @property
    def effective_scale(self) -> float:
        return sigmoid(self.raw) * self.alpha_max


def origin(dim: int, cfg: ManifoldConfig) -> LorentzPoint:
    """The hyperboloid origin [1/sqrt(c), 0, ..., 0]."""
    return LorentzPoint(time=1.0 / cfg.sqrt_c, space=np.zeros(dim, dtype=np.float64))


def lorentz_inner(x, y) -> float:
    """Lorentzian inner product -x0*y0 + sum_i xi*yi of two (d+1)-vectors."""
    xv = as_float_vector(x, "x")
    yv = as_float_vector(y, "y")
    if xv.shape != yv.shape:
        raise InvalidInputError(f"dimension mismatch: {xv.shape} vs {yv.shape}")
    if xv.shape[0] < 2:
        raise InvalidInputError("vectors must have dimension >= 2")
    return float(np.dot(xv[1:], yv[1:]) - xv[0] * yv[0])


def lorentz_norm(v) -> float:
    """sqrt(|<v, v>_L|); zero for lightlike vectors."""
    vv = as_float_vector(v, "v")
    if vv.shape[0] < 2:
        raise InvalidInputError("vectors must have dimension >= 2")
    inner = float(np.dot(vv[1:], vv[1:]) - vv[0] * vv[0])
    return math.sqrt(abs(inner))


def manifold_residual(p: LorentzPoint, cfg: ManifoldConfig) -> float:
    """c * <p, p>_L + 1; zero exactly on the hyperboloid."""
    inner = float(np.dot(p.space, p.space)) - p.time * p.time
    return cfg.curvature * inner + 1.0


def require_on_manifold(p: LorentzPoint, cfg: ManifoldConfig, what: str = "point") -> None:
    if abs(manifold_residual(p, cfg)) > ON_MANIFOLD_RESIDUAL:
        raise InvalidInputError(
            f"{what} is off the hyperboloid for curvature {cfg.curvature}: "
            f"residual {manifold_residual(p, cfg):.3e}"
        )


def geodesic_distance(x: LorentzPoint, y: LorentzPoint, cfg: ManifoldConfig) -> float:
    """Geodesic distance (1/sqrt(c)) * arccosh(-c * <x, y>_L).

    The arccosh argument is clamped to 1 from below: inner products of
    near-identical points dip just under 1 in floating point.
    """
    require_on_manifold(x, cfg, "x")
    require_on_manifold(y, cfg, "y")
    if x.dim != y.dim:
        raise InvalidInputError(f"dimension mismatch: {x.dim} vs {y.dim}")
    inner = float(np.dot(x.space, y.space)) - x.time * y.time
    arg = max(-cfg.curvature * inner, 1.0)
    return math.acosh(arg) / cfg.sqrt_c


def lift_to_tangent(f, scaler: AdaptiveScaler) -> TangentAtOrigin:
    """Scale a Euclidean feature and place it in the origin tangent space."""
    fv = as_float_vector(f, "feature")
    require_finite(fv, "feature")
    return TangentAtOrigin(space=scaler.effective_scale * fv)


def exp_map_origin(v: TangentAtOrigin, cfg: ManifoldConfig) -> LorentzPoint:
    """Exponential map at the origin.

    exp_o(v) = cosh(sqrt(c)*||v||) * o + sinh(sqrt(c)*||v||)/(sqrt(c)*||v||) * v,
    which for v = [0, w] gives time = cosh(sqrt(c)*||w||)/sqrt(c) and
    space = sinh(sqrt(c)*||w||)/(sqrt(c)*||w||) * w. Zero tangents map to the
    origin exactly.
    """
    w = np.asarray(v.space, dtype=np.float64)
    require_finite(w, "tangent vector")
    n = float(np.linalg.norm(w))
    if n < ZERO_TANGENT_NORM:
        return origin(w.shape[0], cfg)
    sc = cfg.sqrt_c
    time = math.cosh(sc * n) / sc
    space = (math.sinh(sc * n) / (sc * n)) * w
    return LorentzPoint(time=time, space=space)


def project_to_manifold(space, cfg: ManifoldConfig) -> LorentzPoint:
    """Repair a point from its space components: time = sqrt(1/c + ||space||^2).

    Used to remove drift after arithmetic on stored coordinates.
    """
    sv = as_float_vector(space, "space")
    require_finite(sv, "space")
    time = math.sqrt(1.0 / cfg.curvature + float(np.dot(sv, sv)))
    return LorentzPoint(time=time, space=sv)
