"""Dataset ingestion, synthetic desk-scale data, PK batch sampling and augmentation.

Real datasets follow the usual re-id directory layout
(``bounding_box_train`` / ``query`` / ``bounding_box_test``) with filenames
like ``0002_c1_f0046182.jpg``. The synthetic generator draws persistent
per-identity appearance signatures (torso/leg colors, body geometry) and
renders them under a domain style that shifts background, hue and
illumination, so two styles share identities' structure but not their global
statistics.
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image

from .errors import ConfigError, InputError

log = logging.getLogger(__name__)

_NAME_RE = re.compile(r"^(\d+)_c(\d+)")

SPLIT_DIRS = {
    "train": "bounding_box_train",
    "query": "query",
    "gallery": "bounding_box_test",
}


@dataclass
class Sample:
    """One image with optional identity/camera annotations."""

    image: np.ndarray  # (3, H, W) float32 in [0, 1]
    identity: int | None
    camera: int | None
    source: str


@dataclass(frozen=True)
class SamplerConfig:
    """PK batch shape: ``identities_per_batch`` labels x ``images_per_identity``."""

    identities_per_batch: int = 16
    images_per_identity: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.identities_per_batch < 2 or self.images_per_identity < 2:
            raise ConfigError("PK sampling needs at least 2 identities and 2 images each")

    @property
    def batch_size(self) -> int:
        return self.identities_per_batch * self.images_per_identity


def load_dataset(root, split: str, image_size: tuple[int, int] = (64, 32)) -> list[Sample]:
    """Load one split from a re-id directory tree.

    Filenames that do not match ``<personID>_c<cameraID>_*`` are skipped with a
    warning. Identities are remapped to contiguous integers; ordering is
    lexicographic by path.
    """
    root = Path(root)
    if split not in SPLIT_DIRS:
        raise InputError(f"unknown split {split!r}")
    directory = root / SPLIT_DIRS[split]
    if not directory.is_dir():
        raise InputError(f"dataset directory {directory} does not exist")
    height, width = image_size

    records = []
    files = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in {".jpg", ".jpeg", ".png"}
    )
    for path in files:
        match = _NAME_RE.match(path.name)
        if not match:
            log.warning("skipping %s: filename does not encode identity/camera", path.name)
            continue
        records.append((path, int(match.group(1)), int(match.group(2))))
    if not records:
        raise InputError(f"no valid samples under {directory}")

    id_map = {pid: i for i, pid in enumerate(sorted({pid for _, pid, _ in records}))}
    samples = []
    for path, pid, cam in records:
        with Image.open(path) as img:
            arr = np.asarray(
                img.convert("RGB").resize((width, height), Image.BILINEAR),
                dtype=np.float32,
            )
        samples.append(
            Sample(
                image=np.ascontiguousarray(arr.transpose(2, 0, 1)) / 255.0,
                identity=id_map[pid],
                camera=cam,
                source=str(path),
            )
        )
    return samples


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainStyle:
    """Global rendering statistics of one domain."""

    name: str
    bg_base: tuple[float, float, float]
    bg_gradient: float
    channel_gain: tuple[float, float, float]
    channel_bias: tuple[float, float, float]
    illum_low: float
    illum_high: float
    noise_sigma: float


STYLES = {
    "a": DomainStyle(
        name="a",
        bg_base=(0.72, 0.74, 0.78),
        bg_gradient=0.12,
        channel_gain=(1.0, 1.0, 1.0),
        channel_bias=(0.0, 0.0, 0.0),
        illum_low=0.9,
        illum_high=1.1,
        noise_sigma=0.02,
    ),
    "b": DomainStyle(
        name="b",
        bg_base=(0.34, 0.30, 0.22),
        bg_gradient=-0.18,
        channel_gain=(0.55, 0.85, 1.25),
        channel_bias=(0.16, 0.05, -0.04),
        illum_low=0.65,
        illum_high=0.95,
        noise_sigma=0.04,
    ),
}


@dataclass(frozen=True)
class IdentitySignature:
    torso_color: tuple[float, float, float]
    leg_color: tuple[float, float, float]
    head_tone: float
    body_width: float
    torso_top: float
    legs_top: float
    legs_bottom: float
    has_stripe: bool
    stripe_color: tuple[float, float, float]
    leg_gap: float


def identity_signature(seed: int, identity: int) -> IdentitySignature:
    """Persistent appearance of one synthetic identity; independent of style."""
    rng = np.random.default_rng([seed, 101, identity])
    return IdentitySignature(
        torso_color=tuple(rng.uniform(0.05, 0.95, 3)),
        leg_color=tuple(rng.uniform(0.05, 0.95, 3)),
        head_tone=float(rng.uniform(0.45, 0.85)),
        body_width=float(rng.uniform(0.5, 0.8)),
        torso_top=float(rng.uniform(0.18, 0.26)),
        legs_top=float(rng.uniform(0.5, 0.62)),
        legs_bottom=float(rng.uniform(0.88, 0.96)),
        has_stripe=bool(rng.random() < 0.5),
        stripe_color=tuple(rng.uniform(0.05, 0.95, 3)),
        leg_gap=float(rng.uniform(0.06, 0.16)),
    )


def _render(sig: IdentitySignature, style: DomainStyle, rng, height: int, width: int):
    dx = int(rng.integers(-3, 4))
    dy = int(rng.integers(-2, 3))
    width_scale = float(rng.uniform(0.9, 1.1))
    illum = float(rng.uniform(style.illum_low, style.illum_high))
    camera = int(rng.integers(0, 6))
    color_jitter = rng.normal(0.0, 0.02, 3)

    rows = np.linspace(-0.5, 0.5, height)[:, None, None]
    img = np.asarray(style.bg_base)[None, None, :] * (1.0 + style.bg_gradient * rows)
    img = np.broadcast_to(img, (height, width, 3)).copy()

    cx = width / 2 + dx
    half = width * sig.body_width * width_scale / 2
    x0, x1 = int(np.clip(round(cx - half), 0, width)), int(np.clip(round(cx + half), 0, width))

    def rows_px(frac):
        return int(np.clip(round(height * frac) + dy, 0, height))

    torso_top, legs_top, legs_bot = (
        rows_px(sig.torso_top),
        rows_px(sig.legs_top),
        rows_px(sig.legs_bottom),
    )
    head_top = rows_px(sig.torso_top - 0.10)

    head_half = max(1, int(half * 0.45))
    hx0 = int(np.clip(round(cx - head_half), 0, width))
    hx1 = int(np.clip(round(cx + head_half), 0, width))
    img[head_top:torso_top, hx0:hx1] = sig.head_tone + color_jitter

    img[torso_top:legs_top, x0:x1] = np.asarray(sig.torso_color) + color_jitter
    if sig.has_stripe:
        third = max(1, (legs_top - torso_top) // 3)
        img[torso_top + third : torso_top + 2 * third, x0:x1] = (
            np.asarray(sig.stripe_color) + color_jitter
        )

    gap_half = max(1, int(width * sig.leg_gap / 2))
    lx = int(np.clip(round(cx), 1, width - 1))
    img[legs_top:legs_bot, x0 : max(x0, lx - gap_half)] = (
        np.asarray(sig.leg_color) + color_jitter
    )
    img[legs_top:legs_bot, min(x1, lx + gap_half) : x1] = (
        np.asarray(sig.leg_color) + color_jitter
    )

    img *= illum
    img = img * np.asarray(style.channel_gain) + np.asarray(style.channel_bias)
    img += rng.normal(0.0, style.noise_sigma, img.shape)
    img = np.clip(img, 0.0, 1.0).astype(np.float32)
    return np.ascontiguousarray(img.transpose(2, 0, 1)), camera


def generate_synthetic(
    num_ids: int,
    images_per_id: int,
    style: str,
    seed: int,
    *,
    image_size: tuple[int, int] = (64, 32),
    image_offset: int = 0,
) -> list[Sample]:
    """Render a deterministic synthetic identity dataset in one domain style.

    ``image_offset`` shifts the per-image jitter stream, so disjoint offsets
    produce fresh views of the same identities (used for query/gallery splits).
    """
    if num_ids < 2:
        raise InputError("need at least 2 identities")
    if style not in STYLES:
        raise InputError(f"unknown style {style!r}; choose from {sorted(STYLES)}")
    height, width = image_size
    dom = STYLES[style]
    samples = []
    for identity in range(num_ids):
        sig = identity_signature(seed, identity)
        for i in range(images_per_id):
            rng = np.random.default_rng([seed, 202, identity, image_offset + i])
            image, camera = _render(sig, dom, rng, height, width)
            samples.append(
                Sample(
                    image=image,
                    identity=identity,
                    camera=camera,
                    source=f"synth[{style}]:{identity}/{image_offset + i}",
                )
            )
    return samples


def save_synthetic_dataset(
    out_root,
    num_ids: int,
    images_per_id: int,
    style: str,
    seed: int,
    *,
    query_per_id: int = 2,
    gallery_per_id: int = 6,
    image_size: tuple[int, int] = (64, 32),
) -> dict[str, int]:
    """Materialize a synthetic dataset as PNG files in the standard layout."""
    out_root = Path(out_root)
    splits = {
        "train": generate_synthetic(num_ids, images_per_id, style, seed, image_size=image_size),
        "query": generate_synthetic(
            num_ids, query_per_id, style, seed, image_size=image_size, image_offset=10_000
        ),
        "gallery": generate_synthetic(
            num_ids, gallery_per_id, style, seed, image_size=image_size, image_offset=20_000
        ),
    }
    counts = {}
    for split, samples in splits.items():
        directory = out_root / SPLIT_DIRS[split]
        directory.mkdir(parents=True, exist_ok=True)
        for i, sample in enumerate(samples):
            arr = (sample.image.transpose(1, 2, 0) * 255.0).round().astype(np.uint8)
            name = f"{sample.identity:04d}_c{sample.camera + 1}_{split}{i:05d}.png"
            Image.fromarray(arr).save(directory / name)
        counts[split] = len(samples)
    return counts


# ---------------------------------------------------------------------------
# sampling and augmentation
# ---------------------------------------------------------------------------


def pk_batches(labels, config: SamplerConfig, num_batches: int) -> Iterator[np.ndarray]:
    """Yield index batches with ``identities_per_batch`` distinct labels and
    ``images_per_identity`` samples each.

    Labels come from ground truth during pretraining and from the current
    global pseudo-label view during fine-tuning. Identities short on images
    are sampled with replacement.
    """
    labels = np.asarray(labels)
    groups = {}
    for idx, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(idx)
    uniques = sorted(groups)
    if len(uniques) < config.identities_per_batch:
        raise ConfigError(
            f"{len(uniques)} identities available, "
            f"{config.identities_per_batch} per batch requested"
        )
    members = {lab: np.asarray(groups[lab]) for lab in uniques}
    uniques = np.asarray(uniques)
    rng = np.random.default_rng(config.seed)
    for _ in range(num_batches):
        chosen = rng.choice(uniques, size=config.identities_per_batch, replace=False)
        batch = []
        for lab in chosen:
            pool = members[int(lab)]
            take = config.images_per_identity
            picks = rng.choice(pool, size=take, replace=len(pool) < take)
            batch.append(picks)
        yield np.concatenate(batch)


def hflip(image: np.ndarray) -> np.ndarray:
    """Mirror an image along its width axis."""
    return np.ascontiguousarray(image[..., ::-1])


def pad_crop(image: np.ndarray, rng, pad: int = 4) -> np.ndarray:
    """Zero-pad ``pad`` pixels per side, then crop back to the original size."""
    _, height, width = image.shape
    padded = np.zeros((image.shape[0], height + 2 * pad, width + 2 * pad), dtype=image.dtype)
    padded[:, pad : pad + height, pad : pad + width] = image
    top = int(rng.integers(0, 2 * pad + 1))
    left = int(rng.integers(0, 2 * pad + 1))
    return np.ascontiguousarray(padded[:, top : top + height, left : left + width])


def random_erase(
    image: np.ndarray,
    rng,
    area_range=(0.02, 0.4),
    aspect_range=(0.3, 3.33),
    attempts: int = 100,
) -> np.ndarray:
    """Blank a random rectangle with the per-channel image mean."""
    _, height, width = image.shape
    out = image.copy()
    fill = image.mean(axis=(1, 2))
    for _ in range(attempts):
        area = rng.uniform(*area_range) * height * width
        aspect = rng.uniform(*aspect_range)
        eh = int(round(np.sqrt(area * aspect)))
        ew = int(round(np.sqrt(area / aspect)))
        if 0 < eh <= height and 0 < ew <= width:
            top = int(rng.integers(0, height - eh + 1))
            left = int(rng.integers(0, width - ew + 1))
            out[:, top : top + eh, left : left + ew] = fill[:, None, None]
            break
    return out


PHASES = ("source-pretrain", "target-finetune", "eval")


def augment(image: np.ndarray, phase: str, rng) -> np.ndarray:
    """Phase-dependent augmentation; eval is the identity."""
    if phase not in PHASES:
        raise InputError(f"unknown phase {phase!r}")
    if phase == "eval":
        return image
    out = image
    if rng.random() < 0.5:
        out = hflip(out)
    out = pad_crop(out, rng)
    if phase == "target-finetune" and rng.random() < 0.5:
        out = random_erase(out, rng)
    return out
