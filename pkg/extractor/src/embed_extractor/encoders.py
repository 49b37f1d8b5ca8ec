"""Image/text encoders.

An encoder exposes `dim`, `encode_images(images) -> (n, dim) float32` and
`encode_texts(texts) -> (n, dim) float32`. ClipEncoder wraps a frozen
pretrained CLIP checkpoint; HashedEncoder is a deterministic offline stand-in
(content-seeded random projections) for tests and dry runs where no model
weights are available.
"""

from __future__ import annotations

import hashlib

import numpy as np

CLIP_MODEL = "openai/clip-vit-base-patch16"
CLIP_DIM = 512


class HashedEncoder:
    """Deterministic pseudo-embeddings seeded from the content bytes.

    Identical inputs always produce identical unit-norm vectors; no model
    download needed. Not semantically meaningful.
    """

    def __init__(self, dim: int = CLIP_DIM):
        self.dim = dim

    def _vector(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        seed = int.from_bytes(digest[:8], "little")
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dim)
        return (v / np.linalg.norm(v)).astype(np.float32)

    def encode_images(self, images) -> np.ndarray:
        out = []
        for img in images:
            rgb = img.convert("RGB")
            out.append(self._vector(rgb.tobytes() + str(rgb.size).encode()))
        return np.stack(out)

    def encode_texts(self, texts) -> np.ndarray:
        return np.stack([self._vector(t.encode("utf-8")) for t in texts])


class ClipEncoder:
    """Frozen pretrained CLIP encoder (ViT-B/16 by default).

    torch/transformers are imported lazily so the tool works without them as
    long as another encoder is selected. No fine-tuning; inference only.
    """

    def __init__(self, model_name: str = CLIP_MODEL):
        import torch
        from transformers import CLIPModel, CLIPProcessor

        self._torch = torch
        self.model = CLIPModel.from_pretrained(model_name)
        self.model.eval()
        self.processor = CLIPProcessor.from_pretrained(model_name)
        self.dim = int(self.model.config.projection_dim)

    def encode_images(self, images) -> np.ndarray:
        inputs = self.processor(images=[img.convert("RGB") for img in images],
                                return_tensors="pt")
        with self._torch.no_grad():
            feats = self.model.get_image_features(**inputs)
        return feats.cpu().numpy().astype(np.float32)

    def encode_texts(self, texts) -> np.ndarray:
        inputs = self.processor(text=list(texts), return_tensors="pt",
                                padding=True, truncation=True)
        with self._torch.no_grad():
            feats = self.model.get_text_features(**inputs)
        return feats.cpu().numpy().astype(np.float32)


def make_encoder(name: str, dim: int = CLIP_DIM):
    if name == "clip":
        return ClipEncoder()
    if name == "hashed":
        return HashedEncoder(dim=dim)
    raise ValueError(f"unknown encoder {name!r} (expected 'clip' or 'hashed')")
