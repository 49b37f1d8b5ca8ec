"""Offline embedding extraction into the HALN binary format.

Reads a manifest CSV of (image_path, prompt, mos) rows, encodes images and
prompts with a frozen pretrained encoder, L2-normalizes the embeddings and
writes them in the alignment engine's binary file format. The engine itself
is never imported; the file format is the only interface.
"""

from .encoders import ClipEncoder, HashedEncoder
from .extract import ExtractReport, extract
from .manifest import ManifestError, ManifestRow, read_manifest
from .writer import write_embeddings

__version__ = "0.1.0"
