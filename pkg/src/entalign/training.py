"""Joint training of scalers, adapters and the modulation network.

The loss is mean L1 regression error plus a weighted mean entailment hinge.
Gradients come from a hand-written reverse-mode pass over the fixed pipeline
(adapt -> scale -> exponential map -> cone geometry -> modulated cosine);
the computation graph is small enough that a dedicated tape is simpler and
easier to verify than a general autodiff dependency. The backward pass is
checked coordinate-by-coordinate against central finite differences in the
test suite.

Clamp and hinge subgradients: wherever the forward pass clamps (arccosh and
arccos arguments, aperture saturation, cosine range) the backward pass passes
zero gradient through a bound clamp, and the hinge uses subgradient 0 at an
exact kink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .adapter import DEFAULT_RATIO, AdapterParams, init_adapter
from .data import Dataset, Sample
from .errors import DegenerateGeometryError, InvalidInputError, UndefinedMetricError
from .manifold import AdaptiveScaler, ZERO_TANGENT_NORM
from .metrics import plcc, srcc
from .regressor import (
    ANGLE_SCALE,
    APERTURE_SCALE,
    CONFIDENCE_SHIFT,
    DISTANCE_SCALE,
    HIDDEN_WIDTH,
    ModulationNetParams,
    init_modnet,
)
from .util import sigmoid, sigmoid_vec

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Minimum val-SRCC gain that counts as an improvement for early stopping;
# guards against float-noise resets of patience.
IMPROVEMENT_EPS = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule and forwarded geometry constants."""

    entail_weight: float = 0.1
    lr: float = 4e-4
    weight_decay: float = 0.005
    batch_size: int = 8
    max_epochs: int = 20
    lr_step: int = 10
    lr_gamma: float = 0.5
    patience: int = 6
    seed: int = 0
    curvature: float = 1.0
    k: float = 0.1
    contraction: float = 0.8
    eps: float = 1e-8
    alpha_max: float = 1.0
    hidden: int = HIDDEN_WIDTH
    bottleneck_ratio: int = DEFAULT_RATIO
    # Image features start slightly inside the text radius: cone violations
    # are then resolved by pushing images outward past their text, which is
    # the geometry the whole objective is meant to learn.
    image_scaler_init: float = -0.25
    text_scaler_init: float = 0.0

    def __post_init__(self):
        positives = {
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "lr_step": self.lr_step,
            "lr_gamma": self.lr_gamma,
            "patience": self.patience,
            "curvature": self.curvature,
            "k": self.k,
        }
        for name, value in positives.items():
            if not value > 0:
                raise InvalidInputError(f"{name} must be positive, got {value}")
        if self.entail_weight < 0:
            raise InvalidInputError(f"entail_weight must be >= 0, got {self.entail_weight}")
        if self.patience > self.max_epochs:
            raise InvalidInputError("patience must not exceed max_epochs")


@dataclass
class ParameterSet:
    """All trainable parameters, flattenable in a fixed field order."""

    image_scaler: AdaptiveScaler
    text_scaler: AdaptiveScaler
    image_adapter: AdapterParams
    text_adapter: AdapterParams
    modnet: ModulationNetParams

    @property
    def dim(self) -> int:
        return self.image_adapter.dim


def init_params(dim: int, cfg: TrainConfig, rng: np.random.Generator) -> ParameterSet:
    """Seeded initialization; draw order is part of the determinism contract."""
    return ParameterSet(
        image_scaler=AdaptiveScaler(raw=cfg.image_scaler_init, alpha_max=cfg.alpha_max),
        text_scaler=AdaptiveScaler(raw=cfg.text_scaler_init, alpha_max=cfg.alpha_max),
        image_adapter=init_adapter(dim, rng, cfg.bottleneck_ratio),
        text_adapter=init_adapter(dim, rng, cfg.bottleneck_ratio),
        modnet=init_modnet(rng, cfg.hidden),
    )


def _adapter_blocks(a: AdapterParams) -> list[np.ndarray]:
    return [a.down.ravel(), a.up.ravel(), np.array([a.gate_raw])]


def flatten_params(p: ParameterSet) -> np.ndarray:
    """Stable flattening: scalers, image adapter, text adapter, network."""
    parts = [np.array([p.image_scaler.raw]), np.array([p.text_scaler.raw])]
    parts += _adapter_blocks(p.image_adapter)
    parts += _adapter_blocks(p.text_adapter)
    net = p.modnet
    parts += [net.w1.ravel(), net.b1, net.w2.ravel(), net.b2, net.w3.ravel(), net.b3]
    return np.concatenate(parts).astype(np.float64)


def unflatten_params(vec: np.ndarray, like: ParameterSet) -> ParameterSet:
    """Rebuild a ParameterSet with the shapes of `like` from a flat vector."""
    d = like.dim
    m = like.image_adapter.bottleneck
    h = like.modnet.hidden
    expected = 2 + 2 * (d * m + m * d + 1) + (3 * h + h + h * h + h + h * 3 + 3)
    if vec.shape != (expected,):
        raise InvalidInputError(f"flat vector has length {vec.shape}, expected ({expected},)")
    pos = 0

    def take(n: int) -> np.ndarray:
        nonlocal pos
        out = vec[pos : pos + n].copy()
        pos += n
        return out

    img_raw = float(take(1)[0])
    txt_raw = float(take(1)[0])

    def take_adapter() -> AdapterParams:
        down = take(d * m).reshape(d, m)
        up = take(m * d).reshape(m, d)
        gate = float(take(1)[0])
        return AdapterParams(down=down, up=up, gate_raw=gate)

    img_adapter = take_adapter()
    txt_adapter = take_adapter()
    net = ModulationNetParams(
        w1=take(3 * h).reshape(3, h),
        b1=take(h),
        w2=take(h * h).reshape(h, h),
        b2=take(h),
        w3=take(h * 3).reshape(h, 3),
        b3=take(3),
    )
    return ParameterSet(
        image_scaler=AdaptiveScaler(raw=img_raw, alpha_max=like.image_scaler.alpha_max),
        text_scaler=AdaptiveScaler(raw=txt_raw, alpha_max=like.text_scaler.alpha_max),
        image_adapter=img_adapter,
        text_adapter=txt_adapter,
        modnet=net,
    )


# ---------------------------------------------------------------------------
# Forward / backward over a batch
# ---------------------------------------------------------------------------


def _check_batch(images: np.ndarray, texts: np.ndarray, params: ParameterSet) -> None:
    if images.ndim != 2 or texts.ndim != 2:
        raise InvalidInputError("batch features must be 2-D arrays")
    if images.shape != texts.shape:
        raise InvalidInputError(
            f"image/text batch shapes differ: {images.shape} vs {texts.shape}"
        )
    if images.shape[1] != params.dim:
        raise InvalidInputError(
            f"feature dim {images.shape[1]} does not match parameters (dim {params.dim})"
        )
    if images.shape[0] == 0:
        raise InvalidInputError("batch is empty")
    if not (np.all(np.isfinite(images)) and np.all(np.isfinite(texts))):
        bad = np.argwhere(~np.isfinite(images).all(axis=1) | ~np.isfinite(texts).all(axis=1))
        raise InvalidInputError(f"non-finite embedding in batch at sample {int(bad[0][0])}")


def _adapt_forward(x: np.ndarray, a: AdapterParams) -> dict:
    g = sigmoid(a.gate_raw)
    hidden_pre = x @ a.down
    hidden = np.maximum(hidden_pre, 0.0)
    branch = hidden @ a.up
    out = g * branch + (1.0 - g) * x
    return {"x": x, "g": g, "hidden_pre": hidden_pre, "hidden": hidden,
            "branch": branch, "out": out}


def _expmap_forward(feat: np.ndarray, raw: float, alpha_max: float, sqrt_c: float) -> dict:
    """Vectorized scale + lift + exponential map with cached intermediates."""
    alpha = sigmoid(raw) * alpha_max
    w = alpha * feat
    n = np.linalg.norm(w, axis=1)
    small = n < ZERO_TANGENT_NORM
    ns = np.where(small, 1.0, n)  # safe divisor
    time = np.cosh(sqrt_c * ns) / sqrt_c
    ratio = np.sinh(sqrt_c * ns) / (sqrt_c * ns)
    space = ratio[:, None] * w
    time = np.where(small, 1.0 / sqrt_c, time)
    space = np.where(small[:, None], 0.0, space)
    return {"alpha": alpha, "raw": raw, "alpha_max": alpha_max, "w": w, "n": n,
            "small": small, "ns": ns, "time": time, "space": space, "ratio": ratio}


def _forward(
    images: np.ndarray,
    texts: np.ndarray,
    scores: np.ndarray | None,
    params: ParameterSet,
    cfg: TrainConfig,
) -> dict:
    """Run the full pipeline over a batch, caching every intermediate.

    With scores=None only predictions are produced (inference mode); the
    ground-truth aperture contraction then never enters the computation.
    """
    _check_batch(images, texts, params)
    batch = images.shape[0]
    c = cfg.curvature
    sc = math.sqrt(c)

    if scores is not None:
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != (batch,):
            raise InvalidInputError(f"scores shape {scores.shape} does not match batch {batch}")
        if not np.all(np.isfinite(scores)):
            bad = int(np.argwhere(~np.isfinite(scores))[0][0])
            raise InvalidInputError(f"missing ground-truth score at sample {bad}")
        if np.any((scores < 0) | (scores > 1)):
            bad = int(np.argwhere((scores < 0) | (scores > 1))[0][0])
            raise InvalidInputError(f"score outside [0, 1] at sample {bad}")

    adp_i = _adapt_forward(images, params.image_adapter)
    adp_t = _adapt_forward(texts, params.text_adapter)
    f_img = adp_i["out"]
    f_txt = adp_t["out"]

    # Euclidean cosine on the adapted features.
    n_img = np.linalg.norm(f_img, axis=1)
    n_txt = np.linalg.norm(f_txt, axis=1)
    if np.any(n_img == 0.0) or np.any(n_txt == 0.0):
        bad = int(np.argwhere((n_img == 0.0) | (n_txt == 0.0))[0][0])
        raise InvalidInputError(f"zero-norm adapted feature at sample {bad}")
    dot = np.einsum("ij,ij->i", f_img, f_txt)
    s_raw = dot / (n_img * n_txt)
    cos_mask = np.abs(s_raw) < 1.0
    s_base = np.clip(s_raw, -1.0, 1.0)

    exp_i = _expmap_forward(f_img, params.image_scaler.raw, params.image_scaler.alpha_max, sc)
    exp_t = _expmap_forward(f_txt, params.text_scaler.raw, params.text_scaler.alpha_max, sc)

    q_txt = np.linalg.norm(exp_t["space"], axis=1)
    if np.any(q_txt < cfg.eps):
        bad = int(np.argwhere(q_txt < cfg.eps)[0][0])
        raise DegenerateGeometryError(
            f"text point at the origin at sample {bad}: cone apex direction undefined"
        )

    eta = np.einsum("ij,ij->i", exp_t["space"], exp_i["space"]) - exp_t["time"] * exp_i["time"]

    # Geodesic distance.
    dist_arg = -c * eta
    dist_mask = dist_arg > 1.0
    dist = np.arccosh(np.maximum(dist_arg, 1.0)) / sc

    # Cone half-aperture with saturation at pi/2.
    ap_denom = np.maximum(sc * q_txt, cfg.eps)
    ap_arg = 2.0 * cfg.k / ap_denom
    ap_mask = ap_arg < 1.0
    aperture = np.arcsin(np.minimum(ap_arg, 1.0))

    # Exterior angle at the text vertex.
    radicand = (c * eta) ** 2 - 1.0
    rad_mask = radicand > cfg.eps
    rad_safe = np.sqrt(np.maximum(radicand, cfg.eps))
    num = exp_i["time"] + exp_t["time"] * c * eta
    den = q_txt * rad_safe
    ratio = num / den
    phi_mask = np.abs(ratio) < 1.0
    phi = np.arccos(np.clip(ratio, -1.0, 1.0))

    # Modulation network on standardized primitives.
    z = np.stack([dist / DISTANCE_SCALE, phi / ANGLE_SCALE, aperture / APERTURE_SCALE], axis=1)
    net = params.modnet
    pre1 = z @ net.w1 + net.b1
    act1 = np.tanh(pre1)
    pre2 = act1 @ net.w2 + net.b2
    act2 = np.tanh(pre2)
    raw_out = act2 @ net.w3 + net.b3
    mod_scale = 1.0 + raw_out[:, 0]
    mod_bias = raw_out[:, 1]
    mod_conf = sigmoid_vec(raw_out[:, 2] + CONFIDENCE_SHIFT)
    pred = mod_conf * (mod_scale * s_base + mod_bias)

    cache = {
        "batch": batch, "c": c, "sc": sc, "cfg": cfg,
        "adp_i": adp_i, "adp_t": adp_t,
        "f_img": f_img, "f_txt": f_txt, "n_img": n_img, "n_txt": n_txt,
        "s_raw": s_raw, "s_base": s_base, "cos_mask": cos_mask,
        "exp_i": exp_i, "exp_t": exp_t,
        "q_txt": q_txt, "eta": eta,
        "dist": dist, "dist_arg": dist_arg, "dist_mask": dist_mask,
        "aperture": aperture, "ap_arg": ap_arg, "ap_mask": ap_mask, "ap_denom": ap_denom,
        "phi": phi, "ratio": ratio, "phi_mask": phi_mask,
        "num": num, "den": den, "rad_safe": rad_safe, "rad_mask": rad_mask,
        "z": z, "act1": act1, "act2": act2,
        "mod_scale": mod_scale, "mod_bias": mod_bias, "mod_conf": mod_conf,
        "pred": pred, "scores": scores,
    }

    if scores is not None:
        gamma = 1.0 - cfg.contraction * scores
        dyn_aperture = gamma * aperture
        margin = phi - dyn_aperture
        hinge = np.maximum(margin, 0.0)
        # Subgradient 0 at the exact kink: strict inequality in the mask.
        hinge_mask = margin > 0.0
        loss_reg = float(np.mean(np.abs(pred - scores)))
        loss_entail = float(np.mean(hinge))
        cache.update({
            "gamma": gamma, "hinge": hinge, "hinge_mask": hinge_mask,
            "loss_reg": loss_reg, "loss_entail": loss_entail,
            "loss_total": loss_reg + cfg.entail_weight * loss_entail,
        })
    return cache


def _backward(cache: dict, params: ParameterSet, cfg: TrainConfig) -> np.ndarray:
    """Reverse pass of the total loss; returns gradients in flattening order."""
    batch = cache["batch"]
    c = cache["c"]
    sc = cache["sc"]
    scores = cache["scores"]
    if scores is None:
        raise InvalidInputError("gradients require ground-truth scores")

    # Regression head.
    d_pred = np.sign(cache["pred"] - scores) / batch
    s_base = cache["s_base"]
    mod_scale, mod_bias, mod_conf = cache["mod_scale"], cache["mod_bias"], cache["mod_conf"]
    d_conf = d_pred * (mod_scale * s_base + mod_bias)
    d_scale = d_pred * mod_conf * s_base
    d_bias = d_pred * mod_conf
    d_sbase = d_pred * mod_conf * mod_scale

    d_raw_out = np.stack(
        [d_scale, d_bias, d_conf * mod_conf * (1.0 - mod_conf)], axis=1
    )
    net = params.modnet
    act1, act2, z = cache["act1"], cache["act2"], cache["z"]
    g_w3 = act2.T @ d_raw_out
    g_b3 = d_raw_out.sum(axis=0)
    d_act2 = d_raw_out @ net.w3.T
    d_pre2 = d_act2 * (1.0 - act2 * act2)
    g_w2 = act1.T @ d_pre2
    g_b2 = d_pre2.sum(axis=0)
    d_act1 = d_pre2 @ net.w2.T
    d_pre1 = d_act1 * (1.0 - act1 * act1)
    g_w1 = z.T @ d_pre1
    g_b1 = d_pre1.sum(axis=0)
    d_z = d_pre1 @ net.w1.T

    d_dist = d_z[:, 0] / DISTANCE_SCALE
    d_phi = d_z[:, 1] / ANGLE_SCALE
    d_aperture = d_z[:, 2] / APERTURE_SCALE

    # Entailment hinge adds to the angle/aperture adjoints.
    lam = cfg.entail_weight
    hinge_mask = cache["hinge_mask"]
    d_phi = d_phi + lam * hinge_mask / batch
    d_aperture = d_aperture - lam * hinge_mask * cache["gamma"] / batch

    # Exterior angle.
    ratio, phi_mask = cache["ratio"], cache["phi_mask"]
    safe = np.where(phi_mask, 1.0 - ratio * ratio, 1.0)
    d_ratio = np.where(phi_mask, -d_phi / np.sqrt(safe), 0.0)
    num, den = cache["num"], cache["den"]
    d_num = d_ratio / den
    d_den = -d_ratio * num / (den * den)

    eta = cache["eta"]
    exp_i, exp_t = cache["exp_i"], cache["exp_t"]
    d_time_i = d_num.copy()
    d_time_t = d_num * c * eta
    d_eta = d_num * exp_t["time"] * c

    q_txt, rad_safe, rad_mask = cache["q_txt"], cache["rad_safe"], cache["rad_mask"]
    d_qtxt = d_den * rad_safe
    d_rad_safe = d_den * q_txt
    d_eta = d_eta + np.where(rad_mask, d_rad_safe * (c * c * eta) / rad_safe, 0.0)

    # Half-aperture.
    ap_arg, ap_mask, ap_denom = cache["ap_arg"], cache["ap_mask"], cache["ap_denom"]
    ap_safe = np.where(ap_mask, 1.0 - ap_arg * ap_arg, 1.0)
    d_ap_arg = np.where(ap_mask, d_aperture / np.sqrt(ap_safe), 0.0)
    denom_live = (sc * q_txt) > cfg.eps
    d_qtxt = d_qtxt + np.where(
        denom_live, -d_ap_arg * 2.0 * cfg.k * sc / (ap_denom * ap_denom), 0.0
    )

    # Geodesic distance.
    dist_arg, dist_mask = cache["dist_arg"], cache["dist_mask"]
    dist_safe = np.where(dist_mask, dist_arg * dist_arg - 1.0, 1.0)
    d_dist_arg = np.where(dist_mask, d_dist / (sc * np.sqrt(dist_safe)), 0.0)
    d_eta = d_eta + d_dist_arg * (-c)

    # Lorentz inner product.
    d_time_t = d_time_t + d_eta * (-exp_i["time"])
    d_time_i = d_time_i + d_eta * (-exp_t["time"])
    d_space_t = d_eta[:, None] * exp_i["space"]
    d_space_i = d_eta[:, None] * exp_t["space"]

    # Text space norm used by aperture and angle denominators.
    d_space_t = d_space_t + (d_qtxt / q_txt)[:, None] * exp_t["space"]

    def expmap_backward(exp: dict, d_time: np.ndarray, d_space: np.ndarray):
        w, n, ns, small, ratio_e = exp["w"], exp["n"], exp["ns"], exp["small"], exp["ratio"]
        # d(time)/dn = sinh(sc*n); d(space)/dn via d(ratio)/dn.
        dn = d_time * np.sinh(sc * ns)
        dratio_dn = (sc * ns * np.cosh(sc * ns) - np.sinh(sc * ns)) / (sc * ns * ns)
        dn = dn + np.einsum("ij,ij->i", d_space, w) * dratio_dn
        d_w = ratio_e[:, None] * d_space + (dn / ns)[:, None] * w
        # Zero-tangent limit: space Jacobian is the identity, time grad vanishes.
        d_w = np.where(small[:, None], d_space, d_w)
        d_feat = exp["alpha"] * d_w
        d_alpha = float(np.einsum("ij,ij->", d_w, exp["w"])) / exp["alpha"]
        sig = sigmoid(exp["raw"])
        d_raw = d_alpha * exp["alpha_max"] * sig * (1.0 - sig)
        return d_feat, d_raw

    d_fimg_geo, d_raw_img = expmap_backward(exp_i, d_time_i, d_space_i)
    d_ftxt_geo, d_raw_txt = expmap_backward(exp_t, d_time_t, d_space_t)

    # Cosine head joins the geometry path at the adapted features.
    f_img, f_txt = cache["f_img"], cache["f_txt"]
    n_img, n_txt = cache["n_img"], cache["n_txt"]
    s_raw, cos_mask = cache["s_raw"], cache["cos_mask"]
    d_sraw = np.where(cos_mask, d_sbase, 0.0)
    inv = 1.0 / (n_img * n_txt)
    d_fimg = d_fimg_geo + d_sraw[:, None] * (f_txt * inv[:, None]
                                             - (s_raw / (n_img * n_img))[:, None] * f_img)
    d_ftxt = d_ftxt_geo + d_sraw[:, None] * (f_img * inv[:, None]
                                             - (s_raw / (n_txt * n_txt))[:, None] * f_txt)

    def adapter_backward(adp: dict, a: AdapterParams, d_out: np.ndarray):
        x, g = adp["x"], adp["g"]
        branch, hidden, hidden_pre = adp["branch"], adp["hidden"], adp["hidden_pre"]
        d_gate = float(np.einsum("ij,ij->", d_out, branch - x))
        d_gate_raw = d_gate * g * (1.0 - g)
        d_branch = g * d_out
        g_up = hidden.T @ d_branch
        d_hidden = d_branch @ a.up.T
        d_pre = d_hidden * (hidden_pre > 0.0)
        g_down = x.T @ d_pre
        return g_down, g_up, d_gate_raw

    g_down_i, g_up_i, g_gate_i = adapter_backward(cache["adp_i"], params.image_adapter, d_fimg)
    g_down_t, g_up_t, g_gate_t = adapter_backward(cache["adp_t"], params.text_adapter, d_ftxt)

    return np.concatenate([
        np.array([d_raw_img]), np.array([d_raw_txt]),
        g_down_i.ravel(), g_up_i.ravel(), np.array([g_gate_i]),
        g_down_t.ravel(), g_up_t.ravel(), np.array([g_gate_t]),
        g_w1.ravel(), g_b1, g_w2.ravel(), g_b2, g_w3.ravel(), g_b3,
    ])


def _batch_arrays(batch: list[Sample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not batch:
        raise InvalidInputError("batch is empty")
    images = np.stack([s.image_emb for s in batch]).astype(np.float64)
    texts = np.stack([s.text_emb for s in batch]).astype(np.float64)
    scores = np.array([s.score for s in batch], dtype=np.float64)
    return images, texts, scores


def forward_batch(
    batch: list[Sample], params: ParameterSet, cfg: TrainConfig
) -> tuple[np.ndarray, float, float, float]:
    """Predictions and (total, regression, entailment) losses for a batch."""
    images, texts, scores = _batch_arrays(batch)
    cache = _forward(images, texts, scores, params, cfg)
    return cache["pred"], cache["loss_total"], cache["loss_reg"], cache["loss_entail"]


def gradients(batch: list[Sample], params: ParameterSet, cfg: TrainConfig) -> np.ndarray:
    """Exact reverse-mode gradient of the total loss, flattened."""
    images, texts, scores = _batch_arrays(batch)
    cache = _forward(images, texts, scores, params, cfg)
    return _backward(cache, params, cfg)


def loss_for_flat(
    theta: np.ndarray, like: ParameterSet, batch: list[Sample], cfg: TrainConfig
) -> float:
    """Total loss as a function of the flat parameter vector (for checks)."""
    p = unflatten_params(theta, like)
    _, loss_total, _, _ = forward_batch(batch, p, cfg)
    return loss_total


# ---------------------------------------------------------------------------
# Optimizer and schedule
# ---------------------------------------------------------------------------


@dataclass
class OptimizerState:
    """Decoupled-weight-decay Adam moments."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "OptimizerState":
        return cls(m=np.zeros(n), v=np.zeros(n), step=0)


def adamw_step(
    theta: np.ndarray,
    grad: np.ndarray,
    state: OptimizerState,
    lr: float,
    weight_decay: float,
) -> tuple[np.ndarray, OptimizerState]:
    """One AdamW update; weight decay multiplies parameters directly."""
    if theta.shape != grad.shape or theta.shape != state.m.shape:
        raise InvalidInputError("parameter/gradient/state shapes disagree")
    step = state.step + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grad
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grad * grad
    m_hat = m / (1.0 - ADAM_BETA1**step)
    v_hat = v / (1.0 - ADAM_BETA2**step)
    new_theta = theta * (1.0 - lr * weight_decay) - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return new_theta, OptimizerState(m=m, v=v, step=step)


def lr_at_epoch(epoch: int, cfg: TrainConfig) -> float:
    """Stepwise decay: lr * gamma^floor(epoch / step), epoch counted from 0."""
    if epoch < 0:
        raise InvalidInputError(f"epoch must be >= 0, got {epoch}")
    return cfg.lr * cfg.lr_gamma ** (epoch // cfg.lr_step)


# ---------------------------------------------------------------------------
# Training loop and evaluation
# ---------------------------------------------------------------------------


@dataclass
class EpochStats:
    epoch: int
    lr: float
    loss_total: float
    loss_reg: float
    loss_entail: float
    val_srcc: float
    val_plcc: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_val_srcc: float = float("-inf")

    @property
    def epochs_run(self) -> int:
        return len(self.epochs)


def predict_scores(dataset: Dataset, params: ParameterSet, cfg: TrainConfig) -> np.ndarray:
    """Inference over a dataset; ground-truth scores never enter."""
    if len(dataset) == 0:
        raise InvalidInputError("dataset is empty")
    cache = _forward(dataset.image_matrix(), dataset.text_matrix(), None, params, cfg)
    return cache["pred"]


def inference_geometry(dataset: Dataset, params: ParameterSet, cfg: TrainConfig) -> dict:
    """Predictions plus raw geometry columns for reporting/export."""
    if len(dataset) == 0:
        raise InvalidInputError("dataset is empty")
    cache = _forward(dataset.image_matrix(), dataset.text_matrix(), None, params, cfg)
    return {
        "pred": cache["pred"],
        "distance": cache["dist"],
        "exterior_angle": cache["phi"],
        "aperture": cache["aperture"],
        "image_space_norm": np.linalg.norm(cache["exp_i"]["space"], axis=1),
        "text_space_norm": cache["q_txt"],
    }


def evaluate(
    dataset: Dataset, params: ParameterSet, cfg: TrainConfig
) -> tuple[float, float, np.ndarray]:
    """(SRCC, PLCC, predictions) against normalized ground truth."""
    preds = predict_scores(dataset, params, cfg)
    truths = dataset.scores()
    if np.any(~np.isfinite(truths)):
        raise InvalidInputError("dataset has unscored samples; cannot evaluate")
    if len(dataset) < 2:
        raise UndefinedMetricError("rank correlation needs at least 2 samples")
    return srcc(preds, truths), plcc(preds, truths), preds


def train(
    train_set: Dataset, val_set: Dataset, cfg: TrainConfig
) -> tuple[ParameterSet, TrainHistory]:
    """Mini-batch AdamW with step decay and early stopping on validation SRCC.

    Keeps the parameters of the best-validation epoch; stops after
    cfg.patience epochs without an SRCC gain above IMPROVEMENT_EPS. Fully
    deterministic given (data, cfg.seed).
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise InvalidInputError("training and validation sets must be nonempty")
    if train_set.dim != val_set.dim:
        raise InvalidInputError(
            f"train/val dimension mismatch: {train_set.dim} vs {val_set.dim}"
        )
    rng = np.random.default_rng(cfg.seed)
    params = init_params(train_set.dim, cfg, rng)
    theta = flatten_params(params)
    state = OptimizerState.zeros(theta.shape[0])

    images = train_set.image_matrix()
    texts = train_set.text_matrix()
    scores = train_set.scores()
    if np.any(~np.isfinite(scores)):
        raise InvalidInputError("training set has unscored samples")
    n = len(train_set)

    history = TrainHistory()
    best_theta = theta.copy()
    stale = 0

    for epoch_idx in range(cfg.max_epochs):
        lr = lr_at_epoch(epoch_idx, cfg)
        perm = rng.permutation(n)
        sum_reg = 0.0
        sum_entail = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            p = unflatten_params(theta, params)
            cache = _forward(images[idx], texts[idx], scores[idx], p, cfg)
            grad = _backward(cache, p, cfg)
            theta, state = adamw_step(theta, grad, state, lr, cfg.weight_decay)
            sum_reg += cache["loss_reg"] * len(idx)
            sum_entail += cache["loss_entail"] * len(idx)

        epoch_reg = sum_reg / n
        epoch_entail = sum_entail / n
        current = unflatten_params(theta, params)
        val_srcc, val_plcc, _ = evaluate(val_set, current, cfg)
        history.epochs.append(EpochStats(
            epoch=epoch_idx + 1,
            lr=lr,
            loss_total=epoch_reg + cfg.entail_weight * epoch_entail,
            loss_reg=epoch_reg,
            loss_entail=epoch_entail,
            val_srcc=val_srcc,
            val_plcc=val_plcc,
        ))
        if val_srcc > history.best_val_srcc + IMPROVEMENT_EPS:
            history.best_val_srcc = val_srcc
            history.best_epoch = epoch_idx + 1
            best_theta = theta.copy()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    return unflatten_params(best_theta, params), history
