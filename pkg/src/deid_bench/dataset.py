"""Synthetic benchmark dataset generation and manifest I/O.

Two styles are supported: ``radphi_like`` (few, heavily randomized imprints,
at most 8 per image) and ``midi_like`` (dense header-style overlays, at most
40 per image, with PHI values intentionally repeated across imprints).
Generation is a pure function of the seed; the manifest plus optional binary
PGM rasters are everything downstream stages consume.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from . import bitmapfont, seeding, textpools
from .core import (
    BoundingBox,
    ImageRecord,
    ImageStyle,
    ImprintRecord,
    PhiCategory,
    canonical_json,
    validate_image,
)

BOX_PAD = 1  # background margin kept between glyphs and the box edge

_MODALITIES = {
    ImageStyle.RADPHI_LIKE: ("CR", "CT", "MR", "US"),
    ImageStyle.MIDI_LIKE: ("CT", "MR", "PT", "DX"),
}


class DatasetError(Exception):
    """Invalid generator configuration or unusable manifest."""


class ManifestParseError(DatasetError):
    """Manifest file is not readable as the documented JSON schema."""


class ManifestIntegrityError(DatasetError):
    """Manifest stored counts disagree with its records."""


@dataclass(frozen=True)
class GeneratorConfig:
    n_images: int
    style: ImageStyle
    phi_image_rate: float = 0.78
    max_imprints: int | None = None
    font_height_range: tuple[int, int] = (0, 0)  # resolved per style when zero
    contrast_range: tuple[float, float] = (0.2, 1.0)
    image_size: tuple[int, int] = (512, 512)
    seed: int = 0
    render_pixels: bool = False
    duplication_factor: int = 3  # midi_like only: copies of a repeated PHI value

    def resolved(self) -> "GeneratorConfig":
        """Fill style-dependent defaults and validate."""
        max_imprints = self.max_imprints
        if max_imprints is None:
            max_imprints = 8 if self.style is ImageStyle.RADPHI_LIKE else 40
        fhr = self.font_height_range
        if fhr == (0, 0):
            fhr = (10, 22) if self.style is ImageStyle.RADPHI_LIKE else (8, 14)
        cfg = GeneratorConfig(
            n_images=self.n_images,
            style=self.style,
            phi_image_rate=self.phi_image_rate,
            max_imprints=max_imprints,
            font_height_range=fhr,
            contrast_range=self.contrast_range,
            image_size=self.image_size,
            seed=self.seed,
            render_pixels=self.render_pixels,
            duplication_factor=self.duplication_factor,
        )
        cfg._validate()
        return cfg

    def _validate(self) -> None:
        if self.n_images < 0:
            raise DatasetError("n_images must be >= 0")
        if not (0.0 <= self.phi_image_rate <= 1.0):
            raise DatasetError("phi_image_rate must be in [0, 1]")
        assert self.max_imprints is not None
        if self.max_imprints < 1:
            raise DatasetError("max_imprints must be >= 1")
        if self.max_imprints > self.style.max_imprints_allowed:
            raise DatasetError(
                f"max_imprints {self.max_imprints} exceeds the {self.style.value} "
                f"cap of {self.style.max_imprints_allowed}"
            )
        lo, hi = self.font_height_range
        if lo < 7 or hi < lo:
            raise DatasetError(f"font_height_range {self.font_height_range} must be ordered and >= 7")
        clo, chi = self.contrast_range
        if not (0.0 < clo <= chi <= 1.0):
            raise DatasetError(f"contrast_range {self.contrast_range} must lie inside (0, 1]")
        w, h = self.image_size
        if w < 32 or h < 32:
            raise DatasetError("image_size must be at least 32x32")
        if self.duplication_factor < 1:
            raise DatasetError("duplication_factor must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_images": self.n_images,
            "style": self.style.value,
            "phi_image_rate": self.phi_image_rate,
            "max_imprints": self.max_imprints,
            "font_height_range": list(self.font_height_range),
            "contrast_range": list(self.contrast_range),
            "image_size": list(self.image_size),
            "seed": self.seed,
            "render_pixels": self.render_pixels,
            "duplication_factor": self.duplication_factor,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GeneratorConfig":
        return cls(
            n_images=int(d["n_images"]),
            style=ImageStyle(d["style"]),
            phi_image_rate=float(d.get("phi_image_rate", 0.78)),
            max_imprints=d.get("max_imprints"),
            font_height_range=tuple(d.get("font_height_range", (0, 0))),
            contrast_range=tuple(d.get("contrast_range", (0.2, 1.0))),
            image_size=tuple(d.get("image_size", (512, 512))),
            seed=int(d.get("seed", 0)),
            render_pixels=bool(d.get("render_pixels", False)),
            duplication_factor=int(d.get("duplication_factor", 3)),
        )


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    generator: GeneratorConfig
    records: tuple[ImageRecord, ...]
    counts: dict[str, int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset_id": self.dataset_id,
            "generator": self.generator.to_dict(),
            "records": [r.to_dict() for r in self.records],
            "counts": dict(self.counts),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DatasetManifest":
        return cls(
            dataset_id=str(d["dataset_id"]),
            generator=GeneratorConfig.from_dict(d["generator"]),
            records=tuple(ImageRecord.from_dict(r) for r in d["records"]),
            counts={k: int(v) for k, v in d["counts"].items()},
        )


def summarize_counts(records: tuple[ImageRecord, ...]) -> dict[str, int]:
    """The Table-2 shaped summary: images / PHI images / PHI imprints."""
    phi_images = sum(1 for r in records if any(i.is_phi for i in r.imprints))
    phi_imprints = sum(1 for r in records for i in r.imprints if i.is_phi)
    return {"images": len(records), "phi_images": phi_images, "phi_imprints": phi_imprints}


def _plan_texts(
    rng: random.Random, style: ImageStyle, n: int, phi_image: bool, dup_factor: int
) -> list[tuple[str, PhiCategory | None]]:
    """Texts and labels for one image, PHI positions shuffled among the rest."""
    texts: list[tuple[str, PhiCategory | None]] = []
    phi_count = rng.randint(1, n) if phi_image else 0
    categories = list(PhiCategory)

    phi_values: list[tuple[str, PhiCategory]] = []
    if phi_image:
        if style is ImageStyle.MIDI_LIKE:
            # Header overlays repeat values: dates and identifiers show up in
            # several imprints of the same image.
            distinct = max(1, math.ceil(phi_count / dup_factor))
            base = [
                (textpools.synth_phi(rng, cat), cat)
                for cat in (rng.choice(categories) for _ in range(distinct))
            ]
            for k in range(phi_count):
                phi_values.append(base[k % distinct])
        else:
            for _ in range(phi_count):
                cat = rng.choice(categories)
                phi_values.append((textpools.synth_phi(rng, cat), cat))

    phi_slots = set(rng.sample(range(n), phi_count)) if phi_count else set()
    phi_iter = iter(phi_values)
    for slot in range(n):
        if slot in phi_slots:
            text, cat = next(phi_iter)
            texts.append((text, cat))
        else:
            texts.append((textpools.synth_nonphi(rng), None))
    return texts


def _place_imprint(
    rng: random.Random,
    text: str,
    font_height: int,
    image_w: int,
    image_h: int,
    taken: list[BoundingBox],
) -> tuple[BoundingBox, int] | None:
    """Find a free spot, shrinking the font when 100 attempts fail.

    Returns (box, effective font height) or None when even the smallest font
    cannot be placed; callers drop the imprint in that case.
    """
    fh = font_height
    while fh >= bitmapfont.GLYPH_H:
        tw, th = bitmapfont.text_extent(text, fh)
        bw, bh = tw + 2 * BOX_PAD, th + 2 * BOX_PAD
        if bw <= image_w and bh <= image_h:
            for _ in range(100):
                x = rng.randint(0, image_w - bw)
                y = rng.randint(0, image_h - bh)
                box = BoundingBox(x=x, y=y, w=bw, h=bh)
                if not any(box.intersects(t) for t in taken):
                    return box, fh
        fh -= 1
    return None


def generate(config: GeneratorConfig) -> DatasetManifest:
    """Deterministically synthesize a manifest from the generator config."""
    cfg = config.resolved()
    rng = seeding.stream(cfg.seed, "dataset", cfg.style.value)
    modalities = _MODALITIES[cfg.style]
    image_w, image_h = cfg.image_size
    records: list[ImageRecord] = []

    for i in range(cfg.n_images):
        image_id = f"img-{i:05d}"
        modality = modalities[i % len(modalities)]
        assert cfg.max_imprints is not None
        n_imprints = rng.randint(1, cfg.max_imprints)
        phi_image = rng.random() < cfg.phi_image_rate
        texts = _plan_texts(rng, cfg.style, n_imprints, phi_image, cfg.duplication_factor)

        imprints: list[ImprintRecord] = []
        taken: list[BoundingBox] = []
        for j, (text, category) in enumerate(texts):
            fh = rng.randint(*cfg.font_height_range)
            contrast = round(rng.uniform(*cfg.contrast_range), 4)
            placed = _place_imprint(rng, text, fh, image_w, image_h, taken)
            if placed is None:
                continue
            box, eff_fh = placed
            taken.append(box)
            imprints.append(
                ImprintRecord(
                    imprint_id=f"{image_id}-t{j:02d}",
                    box=box,
                    text=text,
                    is_phi=category is not None,
                    category=category,
                    font_height=eff_fh,
                    contrast=contrast,
                )
            )
        records.append(
            ImageRecord(
                image_id=image_id,
                width=image_w,
                height=image_h,
                modality=modality,
                style=cfg.style,
                imprints=tuple(imprints),
                pixel_path=f"{image_id}.pgm" if cfg.render_pixels else None,
            )
        )

    record_tuple = tuple(records)
    dataset_id = f"{cfg.style.value}-n{cfg.n_images}-seed{cfg.seed}"
    return DatasetManifest(
        dataset_id=dataset_id,
        generator=cfg,
        records=record_tuple,
        counts=summarize_counts(record_tuple),
    )


class RenderError(DatasetError):
    """Imprint cannot be drawn inside its declared box."""


def render_image(record: ImageRecord, background: int = 0) -> bytes:
    """Rasterize one image to 8-bit grayscale, row-major.

    Each imprint is drawn with the built-in bitmap font so that
    ``|fg - bg| / 255`` equals the imprint's contrast; the direction is
    whichever side of the background has headroom.
    """
    problems = validate_image(record)
    if problems:
        raise RenderError(f"{record.image_id}: {problems[0]}")
    buf = bytearray([background]) * (record.width * record.height)
    for imprint in record.imprints:
        tw, th = bitmapfont.text_extent(imprint.text, imprint.font_height)
        if tw + 2 * BOX_PAD > imprint.box.w:
            raise RenderError(
                f"{record.image_id}/{imprint.imprint_id}: text {imprint.text!r} wider than box"
            )
        if th + 2 * BOX_PAD > imprint.box.h:
            raise RenderError(
                f"{record.image_id}/{imprint.imprint_id}: glyphs taller than box"
            )
        delta = int(round(imprint.contrast * 255))
        fg = background + delta if background + delta <= 255 else background - delta
        bitmapfont.draw_text(
            buf,
            record.width,
            imprint.text,
            imprint.box.x + BOX_PAD,
            imprint.box.y + BOX_PAD,
            imprint.font_height,
            max(0, min(255, fg)),
        )
    return bytes(buf)


def write_pgm(path: Path, width: int, height: int, pixels: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels)


def read_pgm(path: Path) -> tuple[int, int, bytes]:
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise DatasetError(f"{path}: not a binary PGM file")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":  # comment line
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise DatasetError(f"{path}: unsupported maxval {maxval}")
    pixels = data[pos : pos + width * height]
    if len(pixels) != width * height:
        raise DatasetError(f"{path}: truncated pixel data")
    return width, height, pixels


def save_manifest(manifest: DatasetManifest, out_dir: Path) -> Path:
    """Write manifest.json and, when configured, one PGM per image."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.json"
    path.write_text(canonical_json(manifest.to_dict()) + "\n", encoding="utf-8")
    if manifest.generator.render_pixels:
        for record in manifest.records:
            pixels = render_image(record)
            write_pgm(out_dir / f"{record.image_id}.pgm", record.width, record.height, pixels)
    return path


def load_manifest(path: Path) -> DatasetManifest:
    """Read and revalidate a manifest; counts must match the records."""
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    try:
        manifest = DatasetManifest.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestParseError(f"{path}: bad field: {exc}") from exc
    actual = summarize_counts(manifest.records)
    if actual != manifest.counts:
        raise ManifestIntegrityError(
            f"{path}: stored counts {manifest.counts} but records give {actual}"
        )
    for record in manifest.records:
        problems = validate_image(record)
        if problems:
            raise ManifestIntegrityError(f"{path}: {record.image_id}: {problems[0]}")
    return manifest
