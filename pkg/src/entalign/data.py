"""Embedding dataset ingestion, scoring, splitting and synthesis.

The on-disk format ("HALN") is little-endian binary: a 24-byte header
(magic "HALN", version u32, dim u32, count u32, scale_min f32, scale_max f32)
followed by `count` records of (group_id u32, mos_raw f32, image embedding
dim*f32, text embedding dim*f32) with no padding. Loaders reject trailing
bytes. Embedding payloads are single precision; all downstream geometry is
double precision.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FileFormatError, InvalidInputError, RecordDataError

MAGIC = b"HALN"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIff")

# Largest planted rotation between a text direction and its image; scores are
# 1 - angle/PLANTED_ANGLE_MAX before noise.
PLANTED_ANGLE_MAX = math.pi / 3.0
_SAMPLES_PER_GROUP = 40
# Cluster centers span this many dimensions; rotations drift into the
# complement, so misalignment is detectable on prompt groups never trained on.
_CONCEPT_DIM = 2


@dataclass
class Sample:
    """One (image, text, rating) record.

    score is the rating normalized to [0, 1]; it is NaN when the stored
    rating falls outside the declared scale (unscored record, inference-only).
    """

    group_id: int
    mos_raw: float
    score: float
    image_emb: np.ndarray
    text_emb: np.ndarray


@dataclass
class Dataset:
    """An ordered collection of samples sharing one embedding dimension."""

    dim: int
    samples: list[Sample] = field(default_factory=list)
    scale_min: float = 1.0
    scale_max: float = 5.0

    def __post_init__(self):
        if not self.scale_min < self.scale_max:
            raise InvalidInputError(
                f"scale_min must be below scale_max, got [{self.scale_min}, {self.scale_max}]"
            )

    def __len__(self) -> int:
        return len(self.samples)

    def image_matrix(self) -> np.ndarray:
        return np.stack([s.image_emb for s in self.samples]).astype(np.float64)

    def text_matrix(self) -> np.ndarray:
        return np.stack([s.text_emb for s in self.samples]).astype(np.float64)

    def scores(self) -> np.ndarray:
        return np.array([s.score for s in self.samples], dtype=np.float64)

    def group_ids(self) -> np.ndarray:
        return np.array([s.group_id for s in self.samples], dtype=np.int64)

    def subset(self, indices) -> "Dataset":
        return Dataset(
            dim=self.dim,
            samples=[self.samples[i] for i in indices],
            scale_min=self.scale_min,
            scale_max=self.scale_max,
        )


def normalize_score(mos: float, lo: float, hi: float) -> float:
    """Linear min-max normalization of a raw rating onto [0, 1]."""
    if not lo < hi:
        raise InvalidInputError(f"invalid scale bounds [{lo}, {hi}]")
    if not (lo <= mos <= hi):
        raise InvalidInputError(f"rating {mos} outside scale [{lo}, {hi}]")
    return (mos - lo) / (hi - lo)


def save_embeddings(ds: Dataset, path) -> None:
    """Write a dataset in the binary embedding format."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, ds.dim, len(ds.samples),
                              np.float32(ds.scale_min), np.float32(ds.scale_max)))
        rec = struct.Struct(f"<If{ds.dim}f{ds.dim}f")
        for s in ds.samples:
            img = np.asarray(s.image_emb, dtype=np.float32)
            txt = np.asarray(s.text_emb, dtype=np.float32)
            fh.write(rec.pack(s.group_id, np.float32(s.mos_raw), *img, *txt))


def load_embeddings(path) -> Dataset:
    """Read and validate a binary embedding file.

    Structural problems (bad magic, version, truncation, trailing bytes)
    raise FileFormatError with the failing byte offset; non-finite embedding
    payloads raise RecordDataError with the record index. Ratings outside the
    declared scale become NaN scores rather than errors, so inference-only
    files with sentinel ratings still load.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FileFormatError("file shorter than header", offset=len(blob))
    magic, version, dim, count, scale_min, scale_max = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FileFormatError(f"bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise FileFormatError(f"unsupported version {version}", offset=4)
    if dim == 0:
        raise FileFormatError("embedding dimension must be positive", offset=8)
    if not scale_min < scale_max:
        raise FileFormatError(
            f"invalid scale bounds [{scale_min}, {scale_max}]", offset=16
        )
    rec = struct.Struct(f"<If{dim}f{dim}f")
    expected = _HEADER.size + count * rec.size
    if len(blob) < expected:
        raise FileFormatError(
            f"truncated: {count} records declared, file ends early", offset=len(blob)
        )
    if len(blob) > expected:
        raise FileFormatError("trailing bytes after last record", offset=expected)

    samples: list[Sample] = []
    offset = _HEADER.size
    lo, hi = float(scale_min), float(scale_max)
    for i in range(count):
        fields = rec.unpack_from(blob, offset)
        group_id = fields[0]
        mos = float(fields[1])
        img = np.array(fields[2 : 2 + dim], dtype=np.float32)
        txt = np.array(fields[2 + dim : 2 + 2 * dim], dtype=np.float32)
        if not (np.all(np.isfinite(img)) and np.all(np.isfinite(txt))):
            raise RecordDataError("non-finite embedding payload", index=i)
        score = (mos - lo) / (hi - lo) if lo <= mos <= hi else float("nan")
        samples.append(Sample(group_id=group_id, mos_raw=mos, score=score,
                              image_emb=img, text_emb=txt))
        offset += rec.size
    return Dataset(dim=dim, samples=samples, scale_min=lo, scale_max=hi)


def prompt_disjoint_split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Partition by prompt group so no group id spans both subsets.

    Distinct group ids are shuffled with the seeded generator and assigned
    greedily to the training side until it holds at least train_fraction of
    the samples; the split can therefore miss the exact fraction by up to one
    group. At least one group is always left for the test side.
    """
    if not (0.0 < train_fraction < 1.0):
        raise InvalidInputError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    groups = sorted({s.group_id for s in ds.samples})
    if len(groups) < 2:
        raise InvalidInputError("need at least 2 distinct prompt groups to split")
    rng = np.random.default_rng(seed)
    order = [groups[i] for i in rng.permutation(len(groups))]

    sizes = {g: 0 for g in groups}
    for s in ds.samples:
        sizes[s.group_id] += 1
    target = train_fraction * len(ds.samples)

    train_groups: set[int] = set()
    count = 0
    for g in order[:-1]:  # reserve the last group for the test side
        if count >= target:
            break
        train_groups.add(g)
        count += sizes[g]

    train_idx = [i for i, s in enumerate(ds.samples) if s.group_id in train_groups]
    test_idx = [i for i, s in enumerate(ds.samples) if s.group_id not in train_groups]
    return ds.subset(train_idx), ds.subset(test_idx)


def synthetic_dataset(n: int, d: int, seed: int, noise: float) -> Dataset:
    """Planted-hierarchy dataset for desk-scale end-to-end checks.

    Text embeddings are unit-norm cluster centers drawn inside a small
    "concept" subspace; each image embedding is its group's center rotated
    toward the complementary subspace by an angle drawn uniformly from
    [0, PLANTED_ANGLE_MAX]. The alignment score is 1 - angle/angle_max plus
    uniform noise in [-noise, noise], clamped to [0, 1]. Score rank is
    therefore recoverable from the geometry by construction, and the cue
    (energy inside the concept subspace) carries over to prompt groups never
    seen in training. Payloads are quantized to single precision to match
    the file format exactly.
    """
    if n < 10:
        raise InvalidInputError(f"need at least 10 samples, got {n}")
    if d < 4:
        raise InvalidInputError(f"need embedding dimension >= 4, got {d}")
    rng = np.random.default_rng(seed)
    # at least 4 groups so a train/test split can be split again for validation
    n_groups = max(4, n // _SAMPLES_PER_GROUP)
    basis, _ = np.linalg.qr(rng.normal(size=(d, d)))
    kdim = _CONCEPT_DIM
    concept_basis = basis[:, :kdim]
    drift_basis = basis[:, kdim:]

    raw_centers = rng.normal(size=(n_groups, kdim))
    raw_centers /= np.linalg.norm(raw_centers, axis=1, keepdims=True)
    centers = raw_centers @ concept_basis.T

    lo, hi = 1.0, 5.0
    samples: list[Sample] = []
    for i in range(n):
        g = i % n_groups
        center = centers[g]
        theta = rng.uniform(0.0, PLANTED_ANGLE_MAX)
        raw_dir = rng.normal(size=d - kdim)
        raw_dir /= np.linalg.norm(raw_dir)
        ortho = raw_dir @ drift_basis.T
        image = math.cos(theta) * center + math.sin(theta) * ortho

        score = 1.0 - theta / PLANTED_ANGLE_MAX + rng.uniform(-noise, noise)
        score = min(1.0, max(0.0, score))
        mos = np.float32(lo + score * (hi - lo))

        img32 = image.astype(np.float32)
        txt32 = center.astype(np.float32)
        samples.append(Sample(
            group_id=g,
            mos_raw=float(mos),
            score=normalize_score(float(mos), lo, hi),
            image_emb=img32,
            text_emb=txt32,
        ))
    return Dataset(dim=d, samples=samples, scale_min=lo, scale_max=hi)
