"""Copy-paste augmentation: crop a lesion, transform it, place it, blend it."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import dataset_io
from .errors import (
    BorderViolation,
    DegenerateTransform,
    DimensionMismatch,
    EmptyMask,
    NoDonorInstances,
    NoValidPlacement,
    OverlapViolation,
    PatchTooLarge,
)
from .solver import DEFAULT_TOL, NEIGHBORS, index_region, seamless_clone, shifted_region

MODES = ("seamless", "direct")
OVERLAP_POLICIES = ("reject", "occlude")


@dataclass(frozen=True, eq=False)
class RoiPatch:
    """Source intensities around one instance, plus its membership mask.

    The crop is the mask's bounding box grown by one pixel on every side, so
    each member has its four neighbours inside the crop. ``origin`` is the
    ``(x, y)`` source position of the crop's top-left pixel.
    """

    values: np.ndarray
    mask: np.ndarray
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.values.shape != self.mask.shape or self.values.ndim != 2:
            raise DimensionMismatch(
                f"patch values {self.values.shape} and mask {self.mask.shape} must be equal 2D shapes"
            )
        if not self.mask.any():
            raise EmptyMask("patch mask has no member pixels")
        m = self.mask
        if m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any():
            raise BorderViolation("patch mask touches the crop edge")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class TransformParams:
    scale: float = 1.0
    rotation: float = 0.0  # degrees, counter-clockwise as displayed
    flip_horizontal: bool = False


@dataclass(frozen=True)
class Placement:
    dx: int
    dy: int

    @property
    def offset(self) -> tuple[int, int]:
        return (self.dx, self.dy)


@dataclass
class AugmentedSample:
    image: np.ndarray
    masks: list[np.ndarray]
    provenance: dict = field(default_factory=dict)
    report: object = None

    @property
    def pasted_mask(self) -> np.ndarray:
        return self.masks[-1]


@dataclass(frozen=True)
class AugmentConfig:
    scale_range: tuple[float, float] = (0.8, 1.25)
    rotation_range: float = 25.0
    flip_prob: float = 0.5
    mode: str = "seamless"
    overlap: str = "reject"
    max_retries: int = 64
    tol: float = DEFAULT_TOL
    max_iter: int | None = None
    seed: int = 0
    count: int = 1

    def __post_init__(self):
        lo, hi = self.scale_range
        if not (0 < lo <= hi):
            raise ValueError(f"scale range must satisfy 0 < lo <= hi, got {lo}, {hi}")
        if self.rotation_range < 0:
            raise ValueError("rotation range must be non-negative")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip probability must lie in [0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.overlap not in OVERLAP_POLICIES:
            raise ValueError(f"overlap policy must be one of {OVERLAP_POLICIES}")
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.count < 0:
            raise ValueError("count must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scale_range"] = list(self.scale_range)
        return d


def _crop_with_margin(values, mask, y0, y1, x0, x1):
    """Slice rows y0..y1 and cols x0..x1 inclusive; out-of-range rows/cols
    replicate the nearest edge for values and are empty for the mask."""
    h, w = mask.shape
    pad = max(0, -y0, -x0, y1 - (h - 1), x1 - (w - 1))
    if pad:
        values = np.pad(values, pad, mode="edge")
        mask = np.pad(mask, pad, mode="constant", constant_values=False)
    sl = (slice(y0 + pad, y1 + pad + 1), slice(x0 + pad, x1 + pad + 1))
    return values[sl].copy(), mask[sl].copy()


def _recrop(values, mask, origin, error=DegenerateTransform) -> RoiPatch:
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise error("mask has no member pixels")
    y0, y1 = int(rows.min()) - 1, int(rows.max()) + 1
    x0, x1 = int(cols.min()) - 1, int(cols.max()) + 1
    v, m = _crop_with_margin(values, mask, y0, y1, x0, x1)
    return RoiPatch(v, m, (int(origin[0]) + x0, int(origin[1]) + y0))


def extract_roi(source: np.ndarray, instance_mask: np.ndarray) -> RoiPatch:
    source = np.asarray(source, dtype=np.float64)
    instance_mask = np.asarray(instance_mask, dtype=bool)
    if source.shape != instance_mask.shape:
        raise DimensionMismatch(
            f"instance mask {instance_mask.shape} does not match source {source.shape}"
        )
    return _recrop(source, instance_mask, (0, 0), error=EmptyMask)


def transform_roi(patch: RoiPatch, params: TransformParams) -> RoiPatch:
    """Flip, scale and rotate a patch about its crop centre.

    Intensities are resampled bilinearly (edge-replicated outside the crop),
    the mask bilinearly then thresholded at 0.5. Pure flips and the identity
    take an exact index path with no resampling.
    """
    if not params.scale > 0:
        raise ValueError("scale must be positive")
    values, mask = patch.values, patch.mask

    if params.scale == 1.0 and params.rotation % 360.0 == 0.0:
        if params.flip_horizontal:
            values, mask = values[:, ::-1], mask[:, ::-1]
        return _recrop(values, mask, patch.origin)

    h, w = mask.shape
    theta = math.radians(params.rotation)
    cos, sin = math.cos(theta), math.sin(theta)
    flip = -1.0 if params.flip_horizontal else 1.0
    # (x, y) with y pointing down; this rotation is counter-clockwise on screen
    forward = np.array([[cos, sin], [-sin, cos]]) @ np.diag([params.scale * flip, params.scale])
    inverse = np.linalg.inv(forward)

    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    corners = np.array([[-0.5, -0.5], [w - 0.5, -0.5], [-0.5, h - 0.5], [w - 0.5, h - 0.5]])
    extent = np.abs((corners - [cx, cy]) @ forward.T).max(axis=0)
    out_w = int(math.ceil(2 * extent[0])) + 4
    out_h = int(math.ceil(2 * extent[1])) + 4
    ocx, ocy = (out_w - 1) / 2.0, (out_h - 1) / 2.0

    yy, xx = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    rel = np.stack([xx.ravel() - ocx, yy.ravel() - ocy])
    src = inverse @ rel
    coords = np.stack([src[1] + cy, src[0] + cx])  # (row, col) for ndimage

    new_values = ndimage.map_coordinates(values, coords, order=1, mode="nearest").reshape(out_h, out_w)
    weight = ndimage.map_coordinates(
        mask.astype(np.float64), coords, order=1, mode="constant", cval=0.0
    ).reshape(out_h, out_w)
    new_mask = weight >= 0.5
    new_values = np.clip(new_values, 0.0, 1.0)

    origin = (
        round(patch.origin[0] + cx - ocx),
        round(patch.origin[1] + cy - ocy),
    )
    return _recrop(new_values, new_mask, origin)


def placement_bounds(target_shape, patch: RoiPatch):
    """Inclusive ``(dx_lo, dx_hi, dy_lo, dy_hi)`` keeping members strictly interior."""
    h, w = target_shape
    rows, cols = np.nonzero(patch.mask)
    dx_lo, dx_hi = 1 - int(cols.min()), w - 2 - int(cols.max())
    dy_lo, dy_hi = 1 - int(rows.min()), h - 2 - int(rows.max())
    if dx_lo > dx_hi or dy_lo > dy_hi:
        ph, pw = patch.shape
        raise PatchTooLarge(f"{pw}x{ph} patch does not fit inside the {w}x{h} target")
    return dx_lo, dx_hi, dy_lo, dy_hi


def _overlaps(occupied, patch: RoiPatch, dx: int, dy: int) -> bool:
    rows, cols = np.nonzero(patch.mask)
    return bool(occupied[rows + dy, cols + dx].any())


def sample_placement(
    rng: np.random.Generator,
    target: np.ndarray,
    patch: RoiPatch,
    existing_masks=(),
    policy: str = "reject",
    max_retries: int = 64,
) -> Placement:
    if policy not in OVERLAP_POLICIES:
        raise ValueError(f"unknown overlap policy {policy!r}")
    if max_retries < 1:
        raise ValueError("max_retries must be at least 1")
    shape = np.shape(target)
    dx_lo, dx_hi, dy_lo, dy_hi = placement_bounds(shape, patch)

    occupied = np.zeros(shape, dtype=bool)
    if policy == "reject":
        for m in existing_masks:
            occupied |= np.asarray(m, dtype=bool)

    for _ in range(max_retries):
        dx = int(rng.integers(dx_lo, dx_hi + 1))
        dy = int(rng.integers(dy_lo, dy_hi + 1))
        if policy == "occlude" or not _overlaps(occupied, patch, dx, dy):
            return Placement(dx, dy)
    raise NoValidPlacement(f"no overlap-free placement found in {max_retries} attempts")


def paste(
    target: np.ndarray,
    target_masks,
    patch: RoiPatch,
    placement: Placement,
    mode: str = "seamless",
    policy: str = "reject",
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
) -> AugmentedSample:
    """Blend ``patch`` into ``target`` and update the instance masks.

    The pasted region is appended as the last mask. Under ``occlude`` the
    pasted pixels are removed from any original mask they cover; under
    ``reject`` an overlap raises :class:`OverlapViolation`.
    """
    if mode not in MODES:
        raise ValueError(f"unknown blend mode {mode!r}")
    if policy not in OVERLAP_POLICIES:
        raise ValueError(f"unknown overlap policy {policy!r}")
    target = np.asarray(target, dtype=np.float64)
    omega = shifted_region(target.shape, patch.mask, placement.offset)

    originals = []
    for k, m in enumerate(target_masks):
        m = np.asarray(m, dtype=bool)
        if m.shape != target.shape:
            raise DimensionMismatch(f"instance mask {k} has shape {m.shape}, target {target.shape}")
        if (m & omega).any():
            if policy == "reject":
                raise OverlapViolation(f"pasted region overlaps instance mask {k}")
            m = m & ~omega
        originals.append(m.copy())

    report = None
    if mode == "seamless":
        image, report = seamless_clone(target, patch, placement.offset, tol, max_iter)
    else:
        image = target.copy()
        image[omega] = patch.values[patch.mask]

    provenance = {
        "placement": {"dx": placement.dx, "dy": placement.dy},
        "mode": mode,
        "overlap": policy,
        "solve": report.to_dict() if report is not None else None,
    }
    return AugmentedSample(image, originals + [omega], provenance, report)


def seam_score(image: np.ndarray, mask: np.ndarray) -> float:
    """Mean absolute intensity jump across the region's outer edge pairs."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != np.shape(mask):
        raise DimensionMismatch(f"image {image.shape} and mask {np.shape(mask)} differ in shape")
    region = index_region(mask)
    inside = region.mask()
    total, pairs = 0.0, 0
    for dr, dc in NEIGHBORS:
        nr, nc = region.rows + dr, region.cols + dc
        out = ~inside[nr, nc]
        total += float(np.abs(image[region.rows[out], region.cols[out]] - image[nr[out], nc[out]]).sum())
        pairs += int(out.sum())
    return total / pairs


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Per-sample stream: PCG64 seeded from ``SeedSequence([seed, index])``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def draw_transform(rng: np.random.Generator, config: AugmentConfig) -> TransformParams:
    lo, hi = config.scale_range
    scale = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
    r = config.rotation_range
    rotation = float(rng.uniform(-r, r)) if r > 0 else 0.0
    flip = bool(rng.random() < config.flip_prob)
    return TransformParams(scale, rotation, flip)


class Dataset:
    """Manifest plus lazily loaded pixels."""

    def __init__(self, manifest: dataset_io.DatasetManifest):
        self.manifest = manifest
        self._image = lru_cache(maxsize=32)(self._load_image)
        self._masks = lru_cache(maxsize=32)(self._load_masks)

    def _load_image(self, k: int) -> np.ndarray:
        img = dataset_io.load_image(self.manifest.entries[k].image)
        img.setflags(write=False)
        return img

    def _load_masks(self, k: int) -> tuple[np.ndarray, ...]:
        entry = self.manifest.entries[k]
        shape = self.image(k).shape
        masks = tuple(dataset_io.load_mask(p, shape) for p in entry.masks)
        for m in masks:
            m.setflags(write=False)
        return masks

    def __len__(self):
        return len(self.manifest.entries)

    def entry_id(self, k: int) -> str:
        return self.manifest.entries[k].id

    def image(self, k: int) -> np.ndarray:
        return self._image(k)

    def masks(self, k: int) -> tuple[np.ndarray, ...]:
        return self._masks(k)

    def donors(self) -> list[tuple[int, int]]:
        return [(k, j) for k in range(len(self)) for j, m in enumerate(self.masks(k)) if m.any()]


SKIPPABLE = {
    DegenerateTransform: "degenerate_transform",
    PatchTooLarge: "patch_too_large",
    NoValidPlacement: "no_valid_placement",
}


def generate_sample(dataset: Dataset, donors, config: AugmentConfig, index: int):
    """Build output sample ``index``. Returns ``(sample, provenance)``.

    Depends only on the dataset contents, the config and ``index``. Raises one
    of the ``SKIPPABLE`` errors when the draw cannot produce a sample.
    """
    rng = sample_rng(config.seed, index)
    donor_entry, donor_mask = donors[int(rng.integers(len(donors)))]
    n = len(dataset)
    if n >= 2:
        recipient = int(rng.integers(n - 1))
        if recipient >= donor_entry:
            recipient += 1
    else:
        recipient = donor_entry
    params = draw_transform(rng, config)

    provenance = {
        "seed": config.seed,
        "index": index,
        "donor": {"id": dataset.entry_id(donor_entry), "instance": donor_mask},
        "recipient": dataset.entry_id(recipient),
        "transform": asdict(params),
    }
    patch = extract_roi(dataset.image(donor_entry), dataset.masks(donor_entry)[donor_mask])
    patch = transform_roi(patch, params)
    target = dataset.image(recipient)
    target_masks = dataset.masks(recipient)
    placement = sample_placement(rng, target, patch, target_masks, config.overlap, config.max_retries)
    sample = paste(
        target, target_masks, patch, placement, config.mode, config.overlap, config.tol, config.max_iter
    )
    provenance.update(sample.provenance)
    sample.provenance = provenance
    return sample, provenance


@dataclass
class AugmentSummary:
    requested: int
    written: int = 0
    skipped: dict = field(default_factory=dict)
    skips: list = field(default_factory=list)
    not_converged: int = 0
    seam_scores: list = field(default_factory=list)

    @property
    def mean_seam_score(self):
        return float(np.mean(self.seam_scores)) if self.seam_scores else None

    def to_dict(self) -> dict:
        return {
            "requested": self.requested,
            "written": self.written,
            "skipped": dict(sorted(self.skipped.items())),
            "not_converged": self.not_converged,
            "mean_seam_score": self.mean_seam_score,
        }


class MemorySink:
    """Keeps samples in memory; handy for library use and tests."""

    def __init__(self):
        self.samples = {}
        self.closed_with = None

    def write(self, index, sample, provenance):
        self.samples[index] = sample
        return None

    def close(self, config, summary):
        self.closed_with = (config, summary)


class DirectorySink:
    """Writes ``images/``, ``masks/`` and ``manifest.json`` under ``out_dir``.

    File names depend only on the sample index, so the tree is the same no
    matter in which order samples are produced.
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        (self.out_dir / "images").mkdir(parents=True, exist_ok=True)
        (self.out_dir / "masks").mkdir(parents=True, exist_ok=True)
        self.records: dict[int, dataset_io.OutputRecord] = {}

    def write(self, index, sample: AugmentedSample, provenance):
        sid = f"sample_{index:05d}"
        image_path = self.out_dir / "images" / f"{sid}.png"
        dataset_io.save_image(sample.image, image_path)
        mask_paths = []
        for j, m in enumerate(sample.masks):
            mp = self.out_dir / "masks" / f"{sid}_m{j:02d}.png"
            dataset_io.save_mask(m, mp)
            mask_paths.append(mp)
        record = dataset_io.OutputRecord(sid, image_path, mask_paths, provenance)
        self.records[index] = record
        return record

    def close(self, config: AugmentConfig, summary: AugmentSummary):
        records = [self.records[i] for i in sorted(self.records)]
        extra = {
            "summary": summary.to_dict(),
            "skips": [{"index": i, "reason": r} for i, r in summary.skips],
        }
        dataset_io.write_output_manifest(
            records, self.out_dir / "manifest.json", config=config.to_dict(), extra=extra
        )


def augment_dataset(manifest: dataset_io.DatasetManifest, config: AugmentConfig, sink) -> AugmentSummary:
    """Produce ``config.count`` samples, writing each through ``sink``.

    Draws that hit a skippable condition are counted by reason instead of
    written. A solve that stops above tolerance still yields a sample, whose
    provenance carries the non-converged report.
    """
    if len(manifest.entries) == 0:
        raise NoDonorInstances("manifest has no entries")
    dataset = Dataset(manifest)
    donors = dataset.donors()
    if not donors:
        raise NoDonorInstances("no entry in the manifest has a non-empty instance mask")

    summary = AugmentSummary(requested=config.count)
    for i in range(config.count):
        try:
            sample, provenance = generate_sample(dataset, donors, config, i)
        except tuple(SKIPPABLE) as exc:
            reason = SKIPPABLE[type(exc)]
            summary.skipped[reason] = summary.skipped.get(reason, 0) + 1
            summary.skips.append((i, reason))
            continue
        if sample.report is not None and not sample.report.converged:
            summary.not_converged += 1
        summary.seam_scores.append(seam_score(sample.image, sample.pasted_mask))
        sink.write(i, sample, provenance)
        summary.written += 1
    sink.close(config, summary)
    return summary
