"""Grayscale image / instance mask files and the JSON dataset manifest."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, DimensionMismatch, SchemaViolation, UnsupportedFormat

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image: Path
    masks: tuple[Path, ...]


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    root: Path

    def __len__(self):
        return len(self.entries)


@dataclass
class OutputRecord:
    sample_id: str
    image: Path
    masks: list[Path]
    provenance: dict = field(default_factory=dict)


def _open_gray8(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:  # OSError here is an I/O problem, not a decode one
        try:
            with Image.open(fh) as img:
                if img.mode != "L":
                    raise UnsupportedFormat(
                        f"{path}: expected 8-bit grayscale, got PIL mode {img.mode!r}"
                    )
                img.load()
                return np.asarray(img, dtype=np.uint8).copy()
        except UnidentifiedImageError as exc:
            raise DecodeError(f"{path}: not a readable image") from exc
        except (OSError, SyntaxError) as exc:
            raise DecodeError(f"{path}: {exc}") from exc


def load_image(path) -> np.ndarray:
    """Read an 8-bit grayscale PNG or PGM as float intensities in [0, 1]."""
    return _open_gray8(path).astype(np.float64) / 255.0


def quantize(image: np.ndarray) -> np.ndarray:
    # round half up, after clamping
    return np.floor(np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _write_gray8(data: np.ndarray, path) -> None:
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() == ".pgm" else "PNG"
    Image.fromarray(data).save(path, format=fmt)


def save_image(image: np.ndarray, path) -> None:
    _write_gray8(quantize(np.asarray(image, dtype=np.float64)), path)


def load_mask(path, expected_shape: tuple[int, int] | None = None) -> np.ndarray:
    """Binary mask from an 8-bit file; bytes above 127 are members.

    ``expected_shape`` is ``(height, width)``.
    """
    data = _open_gray8(path)
    if expected_shape is not None and data.shape != tuple(expected_shape):
        raise DimensionMismatch(
            f"{path}: mask is {data.shape[1]}x{data.shape[0]}, expected "
            f"{expected_shape[1]}x{expected_shape[0]}"
        )
    return data > 127


def save_mask(mask: np.ndarray, path) -> None:
    _write_gray8(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8), path)


def _image_size(path: Path) -> tuple[int, int]:
    """(height, width) read from the header only."""
    with Image.open(path) as img:
        if img.mode != "L":
            raise UnsupportedFormat(f"{path}: expected 8-bit grayscale, got PIL mode {img.mode!r}")
        return img.height, img.width


def load_manifest(path) -> DatasetManifest:
    """Parse and fully validate a dataset manifest.

    Paths inside the manifest are relative to its own directory. Any problem
    raises :class:`SchemaViolation` naming the entry index and field.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaViolation(f"{path}: top level must be an object")
    if doc.get("version") != MANIFEST_VERSION:
        raise SchemaViolation(
            f"{path}: unsupported manifest version {doc.get('version')!r}", field="version"
        )
    raw_entries = doc.get("entries")
    if not isinstance(raw_entries, list):
        raise SchemaViolation(f"{path}: 'entries' must be a list", field="entries")

    root = path.parent
    seen: set[str] = set()
    entries = []
    for i, raw in enumerate(raw_entries):
        def bad(msg, fld):
            return SchemaViolation(f"{path}: entry {i}, field '{fld}': {msg}", index=i, field=fld)

        if not isinstance(raw, dict):
            raise bad("entry must be an object", "entry")
        eid = raw.get("id")
        if not isinstance(eid, str) or not eid:
            raise bad("must be a non-empty string", "id")
        if eid in seen:
            raise bad(f"duplicate id {eid!r}", "id")
        seen.add(eid)

        image_rel = raw.get("image")
        if not isinstance(image_rel, str):
            raise bad("must be a string path", "image")
        image_path = root / image_rel
        if not image_path.is_file():
            raise bad(f"file not found: {image_rel}", "image")
        try:
            size = _image_size(image_path)
        except (UnsupportedFormat, UnidentifiedImageError, OSError) as exc:
            raise bad(f"{image_rel}: {exc}", "image") from exc

        masks_rel = raw.get("masks")
        if not isinstance(masks_rel, list) or not all(isinstance(m, str) for m in masks_rel):
            raise bad("must be a list of string paths", "masks")
        mask_paths = []
        for m in masks_rel:
            mp = root / m
            if not mp.is_file():
                raise bad(f"file not found: {m}", "masks")
            try:
                msize = _image_size(mp)
            except (UnsupportedFormat, UnidentifiedImageError, OSError) as exc:
                raise bad(f"{m}: {exc}", "masks") from exc
            if msize != size:
                raise bad(
                    f"mask {m} is {msize[1]}x{msize[0]} but image is {size[1]}x{size[0]}",
                    "masks",
                )
            mask_paths.append(mp)
        entries.append(ManifestEntry(eid, image_path, tuple(mask_paths)))

    return DatasetManifest(tuple(entries), root)


def _rel(p: Path, root: Path) -> str:
    return Path(os.path.relpath(p, root)).as_posix()


def write_output_manifest(records, path, config: dict | None = None, extra: dict | None = None) -> None:
    """Write an output manifest that is also a valid input manifest."""
    path = Path(path)
    root = path.parent
    doc = {"version": MANIFEST_VERSION}
    if config is not None:
        doc["config"] = config
    if extra:
        doc.update(extra)
    doc["entries"] = [
        {
            "id": r.sample_id,
            "image": _rel(Path(r.image), root),
            "masks": [_rel(Path(m), root) for m in r.masks],
            "provenance": r.provenance,
        }
        for r in records
    ]
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
