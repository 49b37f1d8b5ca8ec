"""Manifest -> embedding file pipeline."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .manifest import ManifestError, read_manifest
from .writer import write_embeddings


@dataclass
class ExtractReport:
    written: int = 0
    skipped: int = 0
    skipped_paths: list[str] = field(default_factory=list)


def _l2_normalize(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows.astype(np.float64), axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("encoder produced a zero embedding")
    return (rows / norms).astype(np.float32)


def extract(manifest_path, output_path, scale_lo: float, scale_hi: float,
            encoder, batch_size: int = 16, warn=None) -> ExtractReport:
    """Encode every manifest row and write the embedding file.

    Images are encoded with the frozen pretrained encoder (no fine-tuning)
    and both embeddings are L2-normalized before writing. Output records
    follow manifest order regardless of internal batching. Rows whose image
    is missing or undecodable are skipped with a warning; rows that do not
    parse, or whose rating falls outside the declared scale, are hard errors
    carrying the line number.
    """
    if warn is None:
        warn = lambda msg: print(msg, file=sys.stderr)
    if not scale_lo < scale_hi:
        raise ValueError(f"invalid scale bounds [{scale_lo}, {scale_hi}]")
    if batch_size < 1:
        raise ValueError("batch size must be positive")

    rows = read_manifest(manifest_path)
    for row in rows:
        if not (scale_lo <= row.mos <= scale_hi):
            raise ManifestError(
                f"mos {row.mos} outside declared scale [{scale_lo}, {scale_hi}]",
                line=row.line,
            )

    report = ExtractReport()
    usable = []
    images = []
    for row in rows:
        try:
            with Image.open(row.image_path) as img:
                images.append(img.convert("RGB"))
            usable.append(row)
        except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
            report.skipped += 1
            report.skipped_paths.append(row.image_path)
            warn(f"warning: skipping {row.image_path}: {exc}")

    image_vecs = []
    text_vecs = []
    for start in range(0, len(usable), batch_size):
        chunk_rows = usable[start : start + batch_size]
        chunk_imgs = images[start : start + batch_size]
        image_vecs.append(_l2_normalize(encoder.encode_images(chunk_imgs)))
        text_vecs.append(_l2_normalize(encoder.encode_texts([r.prompt for r in chunk_rows])))

    if usable:
        image_mat = np.concatenate(image_vecs)
        text_mat = np.concatenate(text_vecs)
    else:
        image_mat = np.zeros((0, encoder.dim), dtype=np.float32)
        text_mat = np.zeros((0, encoder.dim), dtype=np.float32)

    records = (
        (row.group_id, row.mos, image_mat[i], text_mat[i])
        for i, row in enumerate(usable)
    )
    report.written = write_embeddings(output_path, encoder.dim, records, scale_lo, scale_hi)
    if report.skipped:
        warn(f"skipped {report.skipped} of {len(rows)} rows (missing/undecodable images)")
    return report
