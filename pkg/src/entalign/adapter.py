"""Gated residual bottleneck adapter for Euclidean features.

Output is g * up(relu(down(f))) + (1 - g) * f with g = logistic(gate_raw).
With the up projection initialized to zero the adapter starts as a scaled
identity, preserving the pretrained feature semantics at epoch 0; the gate
then learns how much of the transformed branch to blend in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .util import require_finite, sigmoid

# Bottleneck reduction ratio: hidden width is dim // RATIO.
DEFAULT_RATIO = 2
GATE_RAW_INIT = -4.0


@dataclass
class AdapterParams:
    """Weights of one adapter: down (d, m), up (m, d), scalar gate."""

    down: np.ndarray
    up: np.ndarray
    gate_raw: float

    def __post_init__(self):
        if self.down.ndim != 2 or self.up.ndim != 2:
            raise InvalidInputError("adapter projections must be matrices")
        if self.down.shape[1] != self.up.shape[0] or self.down.shape[0] != self.up.shape[1]:
            raise InvalidInputError(
                f"inconsistent adapter shapes: down {self.down.shape}, up {self.up.shape}"
            )

    @property
    def dim(self) -> int:
        return self.down.shape[0]

    @property
    def bottleneck(self) -> int:
        return self.down.shape[1]

    @property
    def gate(self) -> float:
        return sigmoid(self.gate_raw)


def init_adapter(dim: int, rng: np.random.Generator, ratio: int = DEFAULT_RATIO) -> AdapterParams:
    """Near-identity initialization: small random down, zero up, gate ~ 0.018."""
    if dim < ratio:
        raise InvalidInputError(f"feature dim {dim} smaller than bottleneck ratio {ratio}")
    m = dim // ratio
    bound = 1.0 / np.sqrt(dim)
    down = rng.uniform(-bound, bound, size=(dim, m))
    up = np.zeros((m, dim), dtype=np.float64)
    return AdapterParams(down=down, up=up, gate_raw=GATE_RAW_INIT)


def adapt(f: np.ndarray, params: AdapterParams) -> np.ndarray:
    """Apply the gated residual adapter to one feature vector."""
    fv = np.asarray(f, dtype=np.float64)
    if fv.ndim != 1 or fv.shape[0] != params.dim:
        raise InvalidInputError(
            f"feature must be a vector of dim {params.dim}, got shape {fv.shape}"
        )
    require_finite(fv, "feature")
    g = params.gate
    hidden = np.maximum(fv @ params.down, 0.0)
    return g * (hidden @ params.up) + (1.0 - g) * fv
