"""Core domain types shared by every stage of the benchmark.

Everything here is an immutable value: images with burned-in text regions
(imprints), PHI labels, pipeline run configuration, per-term verdicts, and
metric reports. The canonical serialized form of each type is a JSON object
with snake_case keys; that form is used by dataset manifests, the wire
protocol, and emitted reports.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, asdict
from typing import Any


class PhiCategory(str, enum.Enum):
    """The six text categories that count as PHI."""

    NAME = "name"
    ADDRESS = "address"
    IDENTIFIER = "identifier"
    DATE = "date"
    PHONE = "phone"
    EMAIL = "email"

    @classmethod
    def parse(cls, value: str) -> "PhiCategory":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown PHI category: {value!r}") from None


class ImageStyle(str, enum.Enum):
    """Dataset flavor: few large randomized imprints vs many small header-like ones."""

    RADPHI_LIKE = "radphi_like"
    MIDI_LIKE = "midi_like"

    @property
    def max_imprints_allowed(self) -> int:
        return 8 if self is ImageStyle.RADPHI_LIKE else 40


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in integer pixels, origin at the image top-left."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got w={self.w} h={self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box origin must be non-negative, got x={self.x} y={self.y}")

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def intersects(self, other: "BoundingBox") -> bool:
        return not (
            self.x2 <= other.x or other.x2 <= self.x or self.y2 <= other.y or other.y2 <= self.y
        )

    def iou(self, other: "BoundingBox") -> float:
        """Intersection over union on integer pixel areas."""
        ix = max(0, min(self.x2, other.x2) - max(self.x, other.x))
        iy = max(0, min(self.y2, other.y2) - max(self.y, other.y))
        inter = ix * iy
        if inter == 0:
            return 0.0
        union = self.area + other.area - inter
        return inter / union

    def to_dict(self) -> dict[str, int]:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BoundingBox":
        return cls(x=int(d["x"]), y=int(d["y"]), w=int(d["w"]), h=int(d["h"]))


@dataclass(frozen=True)
class ImprintRecord:
    """One text region burned into an image, with its ground truth.

    ``contrast`` is the normalized foreground/background luminance separation
    in (0, 1]; ``font_height`` is the nominal glyph height in pixels and is
    what the small-text noise model gates on.
    """

    imprint_id: str
    box: BoundingBox
    text: str
    is_phi: bool
    category: PhiCategory | None
    font_height: int
    contrast: float

    def __post_init__(self) -> None:
        if self.is_phi != (self.category is not None):
            raise ValueError(
                f"imprint {self.imprint_id}: is_phi={self.is_phi} but category={self.category}"
            )
        if not self.text:
            raise ValueError(f"imprint {self.imprint_id}: text must be non-empty")
        if self.font_height < 1:
            raise ValueError(f"imprint {self.imprint_id}: font_height must be >= 1")
        if not (0.0 < self.contrast <= 1.0):
            raise ValueError(f"imprint {self.imprint_id}: contrast must be in (0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "imprint_id": self.imprint_id,
            "box": self.box.to_dict(),
            "text": self.text,
            "is_phi": self.is_phi,
            "category": self.category.value if self.category else None,
            "font_height": self.font_height,
            "contrast": self.contrast,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ImprintRecord":
        cat = d.get("category")
        return cls(
            imprint_id=str(d["imprint_id"]),
            box=BoundingBox.from_dict(d["box"]),
            text=str(d["text"]),
            is_phi=bool(d["is_phi"]),
            category=PhiCategory.parse(cat) if cat else None,
            font_height=int(d["font_height"]),
            contrast=float(d["contrast"]),
        )


@dataclass(frozen=True)
class ImageRecord:
    """A benchmark image: dimensions, style, and its ordered imprints."""

    image_id: str
    width: int
    height: int
    modality: str
    style: ImageStyle
    imprints: tuple[ImprintRecord, ...]
    pixel_path: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "image_id": self.image_id,
            "width": self.width,
            "height": self.height,
            "modality": self.modality,
            "style": self.style.value,
            "imprints": [im.to_dict() for im in self.imprints],
            "pixel_path": self.pixel_path,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ImageRecord":
        return cls(
            image_id=str(d["image_id"]),
            width=int(d["width"]),
            height=int(d["height"]),
            modality=str(d["modality"]),
            style=ImageStyle(d["style"]),
            imprints=tuple(ImprintRecord.from_dict(i) for i in d["imprints"]),
            pixel_path=d.get("pixel_path"),
        )


def validate_image(record: ImageRecord) -> list[str]:
    """Check every type invariant on an image record.

    Violations are data, not faults: the function returns an empty list iff
    the record is well-formed, otherwise one message per broken rule naming
    the field involved.
    """
    violations: list[str] = []
    if record.width <= 0 or record.height <= 0:
        violations.append(f"image size {record.width}x{record.height} must be positive")
    limit = record.style.max_imprints_allowed
    if len(record.imprints) > limit:
        violations.append(f"imprint count {len(record.imprints)} exceeds {limit}")
    seen_ids: set[str] = set()
    for imprint in record.imprints:
        if imprint.imprint_id in seen_ids:
            violations.append(f"duplicate imprint_id {imprint.imprint_id}")
        seen_ids.add(imprint.imprint_id)
        box = imprint.box
        if box.x2 > record.width or box.y2 > record.height:
            violations.append(f"imprint {imprint.imprint_id}: box exceeds image bounds")
    return violations


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one pipeline run."""

    setup: str  # "A" (dedicated OCR extraction) or "B" (chat-model extraction)
    chunk_size: int = 10
    repeats: int = 1
    seed: int = 0
    localizer_id: str = "gt-localizer"
    extractor_id: str = "sim-ocr-clean"
    analyzer_id: str = "rule-analyzer"
    retry_limit: int = 2

    def __post_init__(self) -> None:
        if self.setup not in ("A", "B"):
            raise ValueError(f"setup must be 'A' or 'B', got {self.setup!r}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        return cls(
            setup=str(d["setup"]),
            chunk_size=int(d.get("chunk_size", 10)),
            repeats=int(d.get("repeats", 1)),
            seed=int(d.get("seed", 0)),
            localizer_id=str(d.get("localizer_id", "gt-localizer")),
            extractor_id=str(d.get("extractor_id", "sim-ocr-clean")),
            analyzer_id=str(d.get("analyzer_id", "rule-analyzer")),
            retry_limit=int(d.get("retry_limit", 2)),
        )


@dataclass(frozen=True)
class CropExtraction:
    """Extracted text for one localized crop, with provenance and timing."""

    image_id: str
    imprint_id: str
    box: BoundingBox
    text: str
    backend_id: str
    duration: float = 0.0
    source: str = "ocr"  # "ocr" | "chat" | "hybrid-recheck"
    confidence: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "image_id": self.image_id,
            "imprint_id": self.imprint_id,
            "box": self.box.to_dict(),
            "text": self.text,
            "backend_id": self.backend_id,
            "duration": self.duration,
            "source": self.source,
            "confidence": self.confidence,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CropExtraction":
        return cls(
            image_id=str(d["image_id"]),
            imprint_id=str(d["imprint_id"]),
            box=BoundingBox.from_dict(d["box"]),
            text=str(d["text"]),
            backend_id=str(d["backend_id"]),
            duration=float(d.get("duration", 0.0)),
            source=str(d.get("source", "ocr")),
            confidence=d.get("confidence"),
        )


@dataclass(frozen=True)
class AnalysisVerdict:
    """Per-term PHI decision, keyed back to a box by (imprint_id, term_index).

    ``term_index`` counts terms within one box; the wire protocol emits one
    result per tagged element, so pipeline verdicts use term_index 0 and the
    index only exceeds 0 when an analyzer reports several terms directly.
    """

    image_id: str
    imprint_id: str
    term_index: int
    is_phi: bool
    category: PhiCategory | None
    rationale: str = ""

    def __post_init__(self) -> None:
        if self.term_index < 0:
            raise ValueError("term_index must be >= 0")
        if self.category is not None and not self.is_phi:
            raise ValueError("category present implies is_phi")

    def to_dict(self) -> dict[str, Any]:
        return {
            "image_id": self.image_id,
            "imprint_id": self.imprint_id,
            "term_index": self.term_index,
            "is_phi": self.is_phi,
            "category": self.category.value if self.category else None,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AnalysisVerdict":
        cat = d.get("category")
        return cls(
            image_id=str(d["image_id"]),
            imprint_id=str(d["imprint_id"]),
            term_index=int(d.get("term_index", 0)),
            is_phi=bool(d["is_phi"]),
            category=PhiCategory.parse(cat) if cat else None,
            rationale=str(d.get("rationale", "")),
        )


@dataclass(frozen=True)
class MetricsReport:
    """Pooled detection counts plus text-fidelity and latency figures.

    ``precision``/``recall`` follow the vacuous-truth convention: when a
    denominator is zero the ratio is 1.0 so aggregation stays total.
    """

    tp: int = 0
    fp: int = 0
    fn: int = 0
    precision: float = 1.0
    recall: float = 1.0
    wer: float = 0.0
    cer: float = 0.0
    latency_per_image: float = 0.0
    images: int = 0
    runs: int = 1
    skipped_empty_refs: int = 0
    category_correct: int = 0
    category_total: int = 0
    per_run: tuple[dict[str, float], ...] = field(default=())

    def to_dict(self) -> dict[str, Any]:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "wer": self.wer,
            "cer": self.cer,
            "latency_per_image": self.latency_per_image,
            "images": self.images,
            "runs": self.runs,
            "skipped_empty_refs": self.skipped_empty_refs,
            "category_correct": self.category_correct,
            "category_total": self.category_total,
            "per_run": list(self.per_run),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MetricsReport":
        return cls(
            tp=int(d.get("tp", 0)),
            fp=int(d.get("fp", 0)),
            fn=int(d.get("fn", 0)),
            precision=float(d.get("precision", 1.0)),
            recall=float(d.get("recall", 1.0)),
            wer=float(d.get("wer", 0.0)),
            cer=float(d.get("cer", 0.0)),
            latency_per_image=float(d.get("latency_per_image", 0.0)),
            images=int(d.get("images", 0)),
            runs=int(d.get("runs", 1)),
            skipped_empty_refs=int(d.get("skipped_empty_refs", 0)),
            category_correct=int(d.get("category_correct", 0)),
            category_total=int(d.get("category_total", 0)),
            per_run=tuple(d.get("per_run", ())),
        )


def canonical_json(obj: Any, indent: int | None = 2) -> str:
    """Serialize to the canonical JSON form: sorted keys, stable separators.

    Identical values always produce identical bytes, which the determinism
    checks rely on.
    """
    if indent is None:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return json.dumps(obj, sort_keys=True, indent=indent, ensure_ascii=False)
