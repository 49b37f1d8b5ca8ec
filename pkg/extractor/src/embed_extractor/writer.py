"""HALN binary embedding file writer.

Format (little-endian, no padding): magic "HALN", version u32 = 1, dim u32,
count u32, scale_min f32, scale_max f32, then per record: group_id u32,
mos_raw f32, image embedding dim*f32, text embedding dim*f32.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"HALN"
VERSION = 1
_HEADER = struct.Struct("<4sIIIff")


def write_embeddings(path, dim: int, records, scale_min: float, scale_max: float) -> int:
    """Write (group_id, mos, image_vec, text_vec) records; returns the count."""
    rec = struct.Struct(f"<If{dim}f{dim}f")
    payload = bytearray()
    count = 0
    for group_id, mos, image_vec, text_vec in records:
        img = np.asarray(image_vec, dtype=np.float32)
        txt = np.asarray(text_vec, dtype=np.float32)
        if img.shape != (dim,) or txt.shape != (dim,):
            raise ValueError(f"embedding shape mismatch: {img.shape}/{txt.shape} vs ({dim},)")
        payload += rec.pack(int(group_id), np.float32(mos), *img, *txt)
        count += 1
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, count,
                              np.float32(scale_min), np.float32(scale_max)))
        fh.write(payload)
    return count
