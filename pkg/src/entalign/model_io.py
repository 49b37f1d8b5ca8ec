"""Model file serialization.

A model is a single structured-text document: one `key value...` line per
field, arrays written as space-separated decimals with 17 significant digits
so doubles round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adapter import AdapterParams
from .errors import FileFormatError
from .manifold import AdaptiveScaler
from .regressor import ModulationNetParams
from .training import ParameterSet

MODEL_MAGIC = "entalign-model"
MODEL_VERSION = 1


@dataclass
class ModelMeta:
    """Geometry constants and training provenance stored with the weights."""

    curvature: float = 1.0
    k: float = 0.1
    contraction: float = 0.8
    alpha_max: float = 1.0
    dim: int = 0
    hidden: int = 0
    bottleneck: int = 0
    seed: int = 0
    epochs_run: int = 0
    best_val_srcc: float = float("nan")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_array(a: np.ndarray) -> str:
    return " ".join(_fmt(v) for v in np.asarray(a, dtype=np.float64).ravel())


def save_model(path, params: ParameterSet, meta: ModelMeta) -> None:
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        f"curvature {_fmt(meta.curvature)}",
        f"k {_fmt(meta.k)}",
        f"contraction {_fmt(meta.contraction)}",
        f"alpha_max {_fmt(meta.alpha_max)}",
        f"dim {params.dim}",
        f"hidden {params.modnet.hidden}",
        f"bottleneck {params.image_adapter.bottleneck}",
        f"seed {meta.seed}",
        f"epochs_run {meta.epochs_run}",
        f"best_val_srcc {_fmt(meta.best_val_srcc)}",
        f"image_scaler_raw {_fmt(params.image_scaler.raw)}",
        f"text_scaler_raw {_fmt(params.text_scaler.raw)}",
        f"image_adapter_down {_fmt_array(params.image_adapter.down)}",
        f"image_adapter_up {_fmt_array(params.image_adapter.up)}",
        f"image_adapter_gate {_fmt(params.image_adapter.gate_raw)}",
        f"text_adapter_down {_fmt_array(params.text_adapter.down)}",
        f"text_adapter_up {_fmt_array(params.text_adapter.up)}",
        f"text_adapter_gate {_fmt(params.text_adapter.gate_raw)}",
        f"modnet_w1 {_fmt_array(params.modnet.w1)}",
        f"modnet_b1 {_fmt_array(params.modnet.b1)}",
        f"modnet_w2 {_fmt_array(params.modnet.w2)}",
        f"modnet_b2 {_fmt_array(params.modnet.b2)}",
        f"modnet_w3 {_fmt_array(params.modnet.w3)}",
        f"modnet_b3 {_fmt_array(params.modnet.b3)}",
    ]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> tuple[ParameterSet, ModelMeta]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise FileFormatError("empty model file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MODEL_MAGIC:
        raise FileFormatError(f"not a model file: first line {lines[0]!r}")
    if int(head[1]) != MODEL_VERSION:
        raise FileFormatError(f"unsupported model version {head[1]}")

    fields: dict[str, str] = {}
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        fields[key] = rest

    def need(key: str) -> str:
        if key not in fields:
            raise FileFormatError(f"missing model field {key!r}")
        return fields[key]

    def farr(key: str, shape: tuple[int, ...]) -> np.ndarray:
        vals = np.array([float(t) for t in need(key).split()], dtype=np.float64)
        if vals.size != int(np.prod(shape)):
            raise FileFormatError(
                f"field {key!r} has {vals.size} values, expected {int(np.prod(shape))}"
            )
        return vals.reshape(shape)

    dim = int(need("dim"))
    hidden = int(need("hidden"))
    bottleneck = int(need("bottleneck"))
    meta = ModelMeta(
        curvature=float(need("curvature")),
        k=float(need("k")),
        contraction=float(need("contraction")),
        alpha_max=float(need("alpha_max")),
        dim=dim,
        hidden=hidden,
        bottleneck=bottleneck,
        seed=int(need("seed")),
        epochs_run=int(need("epochs_run")),
        best_val_srcc=float(need("best_val_srcc")),
    )
    params = ParameterSet(
        image_scaler=AdaptiveScaler(raw=float(need("image_scaler_raw")), alpha_max=meta.alpha_max),
        text_scaler=AdaptiveScaler(raw=float(need("text_scaler_raw")), alpha_max=meta.alpha_max),
        image_adapter=AdapterParams(
            down=farr("image_adapter_down", (dim, bottleneck)),
            up=farr("image_adapter_up", (bottleneck, dim)),
            gate_raw=float(need("image_adapter_gate")),
        ),
        text_adapter=AdapterParams(
            down=farr("text_adapter_down", (dim, bottleneck)),
            up=farr("text_adapter_up", (bottleneck, dim)),
            gate_raw=float(need("text_adapter_gate")),
        ),
        modnet=ModulationNetParams(
            w1=farr("modnet_w1", (3, hidden)),
            b1=farr("modnet_b1", (hidden,)),
            w2=farr("modnet_w2", (hidden, hidden)),
            b2=farr("modnet_b2", (hidden,)),
            w3=farr("modnet_w3", (hidden, 3)),
            b3=farr("modnet_b3", (3,)),
        ),
    )
    return params, meta
