"""Modulated cosine regressor.

A small feed-forward network reads the geometry summary (distance, exterior
angle, aperture) and emits three per-sample calibration parameters: a scale
stretching the dynamic range of the Euclidean cosine similarity, a bias
correcting systematic offsets, and a confidence in (0, 1) gating the final
score. Output transforms are chosen so an all-zero network is a near-identity
calibration (scale 1, bias 0, confidence logistic(4)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entailment import GeometricPrimitives
from .errors import InvalidInputError
from .util import sigmoid

HIDDEN_WIDTH = 32
CONFIDENCE_SHIFT = 4.0

# Fixed affine normalization of the raw primitives before the network; the
# three inputs otherwise differ by an order of magnitude. Data-independent so
# inference stays stateless.
DISTANCE_SCALE = 2.0
ANGLE_SCALE = math.pi
APERTURE_SCALE = math.pi / 2.0


@dataclass(frozen=True)
class ModulationParams:
    """Per-sample calibration triple."""

    scale: float
    bias: float
    confidence: float


@dataclass
class ModulationNetParams:
    """Weights of the 3 -> h -> h -> 3 network with tanh hidden activations."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        if self.w1.shape[0] != 3:
            raise InvalidInputError(f"network input dimension must be 3, got {self.w1.shape[0]}")
        if self.w3.shape[1] != 3:
            raise InvalidInputError(f"network output dimension must be 3, got {self.w3.shape[1]}")
        h = self.w1.shape[1]
        if (
            self.b1.shape != (h,)
            or self.w2.shape != (h, h)
            or self.b2.shape != (h,)
            or self.w3.shape != (h, 3)
            or self.b3.shape != (3,)
        ):
            raise InvalidInputError("inconsistent network layer shapes")

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]


def zeros_modnet(hidden: int = HIDDEN_WIDTH) -> ModulationNetParams:
    """All-zero network: constant near-identity modulation."""
    return ModulationNetParams(
        w1=np.zeros((3, hidden)),
        b1=np.zeros(hidden),
        w2=np.zeros((hidden, hidden)),
        b2=np.zeros(hidden),
        w3=np.zeros((hidden, 3)),
        b3=np.zeros(3),
    )


def init_modnet(rng: np.random.Generator, hidden: int = HIDDEN_WIDTH) -> ModulationNetParams:
    """Random hidden layers, zero final layer.

    The zero final layer keeps the initial modulation at the identity point
    while still letting gradients reach the hidden weights.
    """
    p = zeros_modnet(hidden)
    p.w1 = rng.uniform(-1.0 / math.sqrt(3), 1.0 / math.sqrt(3), size=(3, hidden))
    p.w2 = rng.uniform(-1.0 / math.sqrt(hidden), 1.0 / math.sqrt(hidden), size=(hidden, hidden))
    return p


def cosine_similarity(f_image: np.ndarray, f_text: np.ndarray) -> float:
    """Euclidean cosine similarity, clamped to [-1, 1]."""
    a = np.asarray(f_image, dtype=np.float64)
    b = np.asarray(f_text, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError(f"feature shape mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise InvalidInputError("cosine similarity undefined for zero-norm input")
    return min(1.0, max(-1.0, float(np.dot(a, b)) / (na * nb)))


def standardize_primitives(z: GeometricPrimitives) -> np.ndarray:
    """Fixed affine normalization of (distance, exterior angle, aperture)."""
    return np.array(
        [z.distance / DISTANCE_SCALE, z.exterior_angle / ANGLE_SCALE, z.aperture / APERTURE_SCALE],
        dtype=np.float64,
    )


def modulation_params(z: GeometricPrimitives, net: ModulationNetParams) -> ModulationParams:
    """Run the network on one geometry summary.

    Raw outputs are transformed as scale = 1 + raw1, bias = raw2,
    confidence = logistic(raw3 + 4), so zero raws mean neutral calibration.
    """
    x = standardize_primitives(z)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("geometric primitives must be finite")
    a1 = np.tanh(x @ net.w1 + net.b1)
    a2 = np.tanh(a1 @ net.w2 + net.b2)
    raw = a2 @ net.w3 + net.b3
    return ModulationParams(
        scale=1.0 + float(raw[0]),
        bias=float(raw[1]),
        confidence=sigmoid(float(raw[2]) + CONFIDENCE_SHIFT),
    )


def predict_score(
    f_image: np.ndarray,
    f_text: np.ndarray,
    z: GeometricPrimitives,
    net: ModulationNetParams,
) -> float:
    """Calibrated score: confidence * (scale * cosine + bias).

    Deliberately not clamped to [0, 1]: the regression target handles range
    and clamping would kill gradients at saturation.
    """
    mod = modulation_params(z, net)
    s_base = cosine_similarity(f_image, f_text)
    return mod.confidence * (mod.scale * s_base + mod.bias)
