"""Manifest CSV parsing and prompt grouping."""

from __future__ import annotations

import csv
from dataclasses import dataclass


class ManifestError(ValueError):
    """A manifest row cannot be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


@dataclass
class ManifestRow:
    image_path: str
    prompt: str
    mos: float
    group_id: int
    line: int


REQUIRED_COLUMNS = ("image_path", "prompt", "mos")


def read_manifest(path) -> list[ManifestRow]:
    """Parse the manifest and assign group ids by exact prompt equality.

    Identical prompt strings share a group id (first-appearance order).
    Structural problems raise ManifestError with the offending line number.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ManifestError("empty manifest", line=1)
        missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ManifestError(f"missing columns {missing}", line=1)

        rows: list[ManifestRow] = []
        groups: dict[str, int] = {}
        for record in reader:
            line = reader.line_num
            image_path = record.get("image_path")
            prompt = record.get("prompt")
            mos_text = record.get("mos")
            if image_path is None or prompt is None or mos_text is None or image_path == "":
                raise ManifestError("row has missing fields", line=line)
            try:
                mos = float(mos_text)
            except (TypeError, ValueError):
                raise ManifestError(f"unparseable mos value {mos_text!r}", line=line)
            if prompt not in groups:
                groups[prompt] = len(groups)
            rows.append(ManifestRow(image_path=image_path, prompt=prompt, mos=mos,
                                    group_id=groups[prompt], line=line))
    return rows
