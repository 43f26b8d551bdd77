"""Pluggable stage backends: localizers, extractors, analyzers.

Three transports exist. ``ground_truth`` replays the manifest. ``simulated``
is fully deterministic and carries the benchmark's failure models: digit
confusion on small fonts, injected call failures, localization drops and
jitter, and optional per-call latency. ``remote`` speaks a single generic
chat-completion HTTP shape so any compatible endpoint can serve live runs;
no model names are hardcoded.

Every random effect is keyed by (run seed, backend seed, purpose, ids), so
concurrent use stays deterministic and repeated runs reproduce byte-equal
results. The confusion stream never keys on the probability itself, which
couples runs at different confusion levels: a substitution that fires at a
low probability fires identically at any higher one.
"""

from __future__ import annotations

import base64
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import protocol, seeding, textpools
from .core import BoundingBox, ImageRecord, ImprintRecord, canonical_json

logger = logging.getLogger(__name__)

DEFAULT_CONFUSION_MAP = {"0": "368"}
SMALL_TEXT_THRESHOLD = 12  # px; confusion only fires below this font height


class BackendError(Exception):
    """Configuration or registry problem."""


class BackendCallError(BackendError):
    """A single backend call failed (transport error or injected fault)."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class LatencyModel:
    mean: float = 0.0
    stddev: float = 0.0

    def to_dict(self) -> dict[str, float]:
        return {"mean": self.mean, "stddev": self.stddev}

    @classmethod
    def from_dict(cls, d: dict[str, Any] | None) -> "LatencyModel":
        if not d:
            return cls()
        return cls(mean=float(d.get("mean", 0.0)), stddev=float(d.get("stddev", 0.0)))


@dataclass(frozen=True)
class SimConfig:
    """Noise and fault model for simulated backends."""

    confusion_prob: float = 0.0
    small_text_threshold: int = SMALL_TEXT_THRESHOLD
    confusion_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_CONFUSION_MAP))
    failure_rate: float = 0.0
    latency_model: LatencyModel = LatencyModel()
    seed: int = 0
    drop_prob: float = 0.0  # localizer: missed detections
    jitter_px: int = 0  # localizer: box coordinate noise

    def __post_init__(self) -> None:
        for name in ("confusion_prob", "failure_rate", "drop_prob"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise BackendError(f"{name} must be in [0, 1], got {v}")
        if self.small_text_threshold < 1:
            raise BackendError("small_text_threshold must be >= 1")
        if self.latency_model.mean < 0:
            raise BackendError("latency mean must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {
            "confusion_prob": self.confusion_prob,
            "small_text_threshold": self.small_text_threshold,
            "confusion_map": dict(self.confusion_map),
            "failure_rate": self.failure_rate,
            "latency_model": self.latency_model.to_dict(),
            "seed": self.seed,
            "drop_prob": self.drop_prob,
            "jitter_px": self.jitter_px,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SimConfig":
        return cls(
            confusion_prob=float(d.get("confusion_prob", 0.0)),
            small_text_threshold=int(d.get("small_text_threshold", SMALL_TEXT_THRESHOLD)),
            confusion_map={str(k): str(v) for k, v in d.get("confusion_map", DEFAULT_CONFUSION_MAP).items()},
            failure_rate=float(d.get("failure_rate", 0.0)),
            latency_model=LatencyModel.from_dict(d.get("latency_model")),
            seed=int(d.get("seed", 0)),
            drop_prob=float(d.get("drop_prob", 0.0)),
            jitter_px=int(d.get("jitter_px", 0)),
        )


@dataclass(frozen=True)
class BackendDescriptor:
    backend_id: str
    kind: str  # "localizer" | "extractor" | "analyzer"
    transport: str  # "ground_truth" | "simulated" | "remote"
    interface: str = "ocr"  # "ocr" (per-crop) | "chat" (chunked prompt calls)
    max_crops_per_call: int = 10
    sim: SimConfig | None = None
    endpoint: str | None = None
    model: str | None = None
    auth_env: str | None = None
    timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.kind not in ("localizer", "extractor", "analyzer"):
            raise BackendError(f"unknown backend kind {self.kind!r}")
        if self.transport not in ("ground_truth", "simulated", "remote"):
            raise BackendError(f"unknown transport {self.transport!r}")
        if self.interface not in ("ocr", "chat"):
            raise BackendError(f"unknown interface {self.interface!r}")
        if self.max_crops_per_call < 1:
            raise BackendError("max_crops_per_call must be >= 1")
        if self.transport == "remote" and not (self.endpoint and self.model):
            raise BackendError(f"{self.backend_id}: remote transport requires endpoint and model")

    @property
    def is_chat(self) -> bool:
        return self.interface == "chat" or self.transport == "remote"

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "backend_id": self.backend_id,
            "kind": self.kind,
            "transport": self.transport,
            "interface": self.interface,
            "max_crops_per_call": self.max_crops_per_call,
            "timeout": self.timeout,
        }
        if self.sim is not None:
            d["sim"] = self.sim.to_dict()
        if self.endpoint:
            d.update(endpoint=self.endpoint, model=self.model, auth_env=self.auth_env)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BackendDescriptor":
        return cls(
            backend_id=str(d["backend_id"]),
            kind=str(d["kind"]),
            transport=str(d["transport"]),
            interface=str(d.get("interface", "chat" if d.get("transport") == "remote" else "ocr")),
            max_crops_per_call=int(d.get("max_crops_per_call", 10)),
            sim=SimConfig.from_dict(d["sim"]) if d.get("sim") is not None else None,
            endpoint=d.get("endpoint"),
            model=d.get("model"),
            auth_env=d.get("auth_env"),
            timeout=float(d.get("timeout", 60.0)),
        )


@dataclass(frozen=True)
class Crop:
    """A localized text region handed to an extractor.

    Simulated backends read the ground truth record; a remote backend reads
    the pixel crop instead.
    """

    image_id: str
    imprint_id: str
    box: BoundingBox
    truth: ImprintRecord | None = None
    pixels: bytes | None = None  # PNG bytes for remote attachments


def _maybe_sleep(cfg: SimConfig, *key: object) -> None:
    if cfg.latency_model.mean <= 0 and cfg.latency_model.stddev <= 0:
        return
    rng = seeding.stream(cfg.seed, "latency", *key)
    delay = max(0.0, rng.gauss(cfg.latency_model.mean, cfg.latency_model.stddev))
    if delay > 0:
        time.sleep(delay)


def _maybe_fail(cfg: SimConfig, attempt: int, *key: object) -> None:
    if cfg.failure_rate <= 0:
        return
    rng = seeding.stream(cfg.seed, "failure", *key, attempt)
    if rng.random() < cfg.failure_rate:
        raise BackendCallError(f"injected call failure (attempt {attempt})", attempts=attempt + 1)


def corrupt_text(text: str, font_height: int, cfg: SimConfig, run_seed: int,
                 image_id: str, imprint_id: str) -> str:
    """Apply the small-text digit confusion model.

    Above the threshold the text passes through verbatim. Below it, each
    character in the confusion map is independently substituted with
    probability ``confusion_prob``. Both the trigger draw and the
    replacement draw always happen, so streams stay aligned across
    different probabilities.
    """
    if font_height >= cfg.small_text_threshold or not cfg.confusion_map:
        return text
    rng = seeding.stream(run_seed, cfg.seed, "confusion", image_id, imprint_id)
    out: list[str] = []
    for ch in text:
        repl_set = cfg.confusion_map.get(ch)
        if repl_set:
            u = rng.random()
            repl = rng.choice(sorted(repl_set))
            out.append(repl if u < cfg.confusion_prob else ch)
        else:
            out.append(ch)
    return "".join(out)


def sim_confidence(crop: ImprintRecord) -> float:
    """Per-crop confidence a dedicated OCR engine would report.

    Derived from the two render attributes the noise model cares about:
    contrast and font height (saturating at 24 px).
    """
    return round(0.5 * crop.contrast + 0.5 * min(1.0, crop.font_height / 24.0), 4)


class GroundTruthLocalizer:
    def __init__(self, descriptor: BackendDescriptor):
        self.descriptor = descriptor

    def localize(self, image: ImageRecord, run_seed: int) -> list[tuple[str, BoundingBox]]:
        return [(im.imprint_id, im.box) for im in image.imprints]


class SimulatedLocalizer:
    """Ground-truth boxes with configurable drops and coordinate jitter.

    The jitter parameters stand in for detector confidence thresholds and
    crop padding, which the source benchmark does not specify.
    """

    def __init__(self, descriptor: BackendDescriptor):
        self.descriptor = descriptor
        self.cfg = descriptor.sim or SimConfig()

    def localize(self, image: ImageRecord, run_seed: int) -> list[tuple[str, BoundingBox]]:
        cfg = self.cfg
        _maybe_sleep(cfg, run_seed, "localize", image.image_id)
        out: list[tuple[str, BoundingBox]] = []
        for im in image.imprints:
            rng = seeding.stream(run_seed, cfg.seed, "localize", image.image_id, im.imprint_id)
            if rng.random() < cfg.drop_prob:
                continue
            box = im.box
            if cfg.jitter_px > 0:
                dx = rng.randint(-cfg.jitter_px, cfg.jitter_px)
                dy = rng.randint(-cfg.jitter_px, cfg.jitter_px)
                x = min(max(0, box.x + dx), image.width - box.w)
                y = min(max(0, box.y + dy), image.height - box.h)
                box = BoundingBox(x=x, y=y, w=box.w, h=box.h)
            out.append((im.imprint_id, box))
        return out


class SimulatedOcrExtractor:
    """Dedicated-OCR stand-in: one call per crop, returns text + confidence."""

    def __init__(self, descriptor: BackendDescriptor):
        self.descriptor = descriptor
        self.cfg = descriptor.sim or SimConfig()

    def extract_crop(self, crop: Crop, run_seed: int, attempt: int = 0) -> tuple[str, float]:
        if crop.truth is None:
            raise BackendError("simulated extractor needs ground-truth crops")
        cfg = self.cfg
        _maybe_fail(cfg, attempt, "extract", crop.image_id, crop.imprint_id)
        _maybe_sleep(cfg, "extract", crop.image_id, crop.imprint_id, attempt)
        text = corrupt_text(
            crop.truth.text, crop.truth.font_height, cfg, run_seed,
            crop.image_id, crop.imprint_id,
        )
        return text, sim_confidence(crop.truth)


class SimulatedChatExtractor:
    """Chat-model stand-in: one call per chunk, id-keyed JSON body out."""

    def __init__(self, descriptor: BackendDescriptor):
        self.descriptor = descriptor
        self.cfg = descriptor.sim or SimConfig()

    def extract_chunk(self, chunk: protocol.Chunk, crops: list[Crop], prompt: str,
                      run_seed: int, attempt: int = 0) -> str:
        cfg = self.cfg
        scope = f"{crops[0].image_id}/c{chunk.chunk_index}" if crops else f"c{chunk.chunk_index}"
        _maybe_fail(cfg, attempt, "extract-chunk", scope)
        _maybe_sleep(cfg, "extract-chunk", scope, attempt)
        texts: list[str] = []
        for crop in crops:
            if crop.truth is None:
                raise BackendError("simulated extractor needs ground-truth crops")
            texts.append(
                corrupt_text(
                    crop.truth.text, crop.truth.font_height, cfg, run_seed,
                    crop.image_id, crop.imprint_id,
                )
            )
        return protocol.extraction_wire_body(texts)


def analyze_rule_based(tagged: list[str]) -> list[dict[str, Any]]:
    """Deterministic oracle analyzer over tagged strings.

    Applies the generator's own category patterns; on clean generated text
    it reproduces ground-truth labels exactly. Returns one entry per term:
    {index, term_index, is_phi, category, rationale}. Boxes whose text holds
    no PHI term produce a single non-PHI entry.
    """
    decoded = protocol.decode_tagged(tagged)
    out: list[dict[str, Any]] = []
    for idx, text in decoded:
        terms = textpools.classify_text(text)
        if not terms:
            out.append(
                {"index": idx, "term_index": 0, "is_phi": False, "category": None,
                 "rationale": "no PHI pattern"}
            )
            continue
        for term_index, (category, term) in enumerate(terms):
            out.append(
                {"index": idx, "term_index": term_index, "is_phi": True,
                 "category": category, "rationale": f"matches {category.value} pattern: {term}"}
            )
    return out


class SimulatedChatAnalyzer:
    """Wraps the rule-based analyzer behind the chat wire protocol.

    It parses the tagged section out of the prompt it receives, so every
    pipeline run exercises the real prompt/parse path end to end.
    """

    TAG_SECTION = "Tagged input:\n"

    def __init__(self, descriptor: BackendDescriptor):
        self.descriptor = descriptor
        self.cfg = descriptor.sim or SimConfig()

    def analyze_chunk(self, prompt: str, scope: str, attempt: int = 0) -> str:
        cfg = self.cfg
        _maybe_fail(cfg, attempt, "analyze", scope)
        _maybe_sleep(cfg, "analyze", scope, attempt)
        if self.TAG_SECTION not in prompt:
            raise BackendError("prompt is missing the tagged input section")
        tagged = [ln for ln in prompt.split(self.TAG_SECTION, 1)[1].splitlines() if ln.strip()]
        entries = analyze_rule_based(tagged)
        # Wire schema keys results by id only: several terms in one box
        # collapse to one result whose category comes from the first term.
        by_id: dict[int, dict[str, Any]] = {}
        for entry in entries:
            idx = entry["index"]
            if idx in by_id and not entry["is_phi"]:
                continue
            if idx in by_id and by_id[idx]["classification"] == "PHI":
                continue
            by_id[idx] = {
                "id": idx,
                "classification": "PHI" if entry["is_phi"] else "non-PHI",
                "category": entry["category"].value if entry["category"] else None,
                "rationale": entry["rationale"],
            }
        return protocol.verdict_wire_body([by_id[i] for i in sorted(by_id)])


class RemoteChatBackend:
    """Generic chat-completion HTTP adapter.

    One wire shape for every stage: POST {model, messages, max_tokens} with
    optional base64 data-URL image attachments, bearer auth from the
    configured environment variable, bounded retries with exponential
    backoff and full jitter.
    """

    BACKOFF_BASE = 0.25  # seconds, doubling per attempt

    def __init__(self, descriptor: BackendDescriptor, session: Any | None = None):
        import os

        self.descriptor = descriptor
        if session is None:
            import requests

            session = requests.Session()
        self.session = session
        self.auth_token = os.environ.get(descriptor.auth_env, "") if descriptor.auth_env else ""

    def _messages(self, prompt: str, images: list[bytes] | None) -> list[dict[str, Any]]:
        content: list[dict[str, Any]] | str
        if images:
            content = [{"type": "text", "text": prompt}]
            for img in images:
                b64 = base64.b64encode(img).decode("ascii")
                content.append(
                    {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}}
                )
        else:
            content = prompt
        return [
            {"role": "system", "content": "You are a precise medical imaging text assistant."},
            {"role": "user", "content": content},
        ]

    def call_remote(self, prompt: str, images: list[bytes] | None = None,
                    retry_limit: int = 2, max_tokens: int = 2048) -> str:
        """Send one chat request; returns the raw text of the model reply."""
        import random as _random

        import requests

        desc = self.descriptor
        body = {"model": desc.model, "messages": self._messages(prompt, images),
                "max_tokens": max_tokens}
        headers = {"Content-Type": "application/json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"

        last_error: Exception | None = None
        for attempt in range(retry_limit + 1):
            try:
                resp = self.session.post(
                    desc.endpoint, json=body, headers=headers, timeout=desc.timeout
                )
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise BackendCallError(
                        f"{desc.backend_id}: HTTP {resp.status_code}", attempts=attempt + 1
                    )
                if resp.status_code >= 400:
                    raise BackendCallError(
                        f"{desc.backend_id}: HTTP {resp.status_code}: {resp.text[:200]}",
                        attempts=attempt + 1,
                    )
                data = resp.json()
                return str(data["choices"][0]["message"]["content"])
            except BackendCallError as exc:
                last_error = exc
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = BackendCallError(f"{desc.backend_id}: {exc}", attempts=attempt + 1)
            if attempt < retry_limit:
                delay = self.BACKOFF_BASE * (2 ** attempt) * _random.random()
                logger.warning(
                    "%s: attempt %d failed (%s), retrying in %.2fs",
                    desc.backend_id, attempt + 1, last_error, delay,
                )
                time.sleep(delay)
        raise BackendCallError(
            f"{desc.backend_id}: call failed after {retry_limit + 1} attempts: {last_error}",
            attempts=retry_limit + 1,
        )


def _builtin_descriptors() -> list[BackendDescriptor]:
    return [
        BackendDescriptor("gt-localizer", "localizer", "ground_truth"),
        BackendDescriptor(
            "sim-localizer", "localizer", "simulated",
            sim=SimConfig(drop_prob=0.05, jitter_px=2, seed=11),
        ),
        BackendDescriptor(
            "sim-ocr-clean", "extractor", "simulated", interface="ocr",
            sim=SimConfig(confusion_prob=0.0, seed=21),
        ),
        BackendDescriptor(
            "sim-ocr-noisy", "extractor", "simulated", interface="ocr",
            sim=SimConfig(confusion_prob=0.3, seed=21),
        ),
        BackendDescriptor(
            "sim-chat-clean", "extractor", "simulated", interface="chat",
            sim=SimConfig(confusion_prob=0.0, seed=31),
        ),
        BackendDescriptor(
            "sim-chat-extractor", "extractor", "simulated", interface="chat",
            sim=SimConfig(confusion_prob=0.05, seed=31),
        ),
        BackendDescriptor(
            "sim-chat-short", "extractor", "simulated", interface="chat",
            max_crops_per_call=5, sim=SimConfig(confusion_prob=0.05, seed=31),
        ),
        BackendDescriptor(
            "rule-analyzer", "analyzer", "simulated", interface="chat",
            sim=SimConfig(seed=41),
        ),
    ]


class BackendRegistry:
    """Descriptor lookup plus instantiation of the matching adapter."""

    def __init__(self, descriptors: list[BackendDescriptor] | None = None):
        self._by_id: dict[str, BackendDescriptor] = {}
        for desc in descriptors if descriptors is not None else _builtin_descriptors():
            self._by_id[desc.backend_id] = desc

    def __contains__(self, backend_id: str) -> bool:
        return backend_id in self._by_id

    def describe(self, backend_id: str) -> BackendDescriptor:
        try:
            return self._by_id[backend_id]
        except KeyError:
            raise BackendError(f"unknown backend: {backend_id}") from None

    def add(self, descriptor: BackendDescriptor) -> None:
        self._by_id[descriptor.backend_id] = descriptor

    def ids(self) -> list[str]:
        return sorted(self._by_id)

    def registry_hash(self) -> str:
        import hashlib

        blob = canonical_json(
            [self._by_id[k].to_dict() for k in sorted(self._by_id)], indent=None
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def instantiate(self, backend_id: str) -> Any:
        desc = self.describe(backend_id)
        if desc.transport == "ground_truth":
            if desc.kind != "localizer":
                raise BackendError(f"{backend_id}: ground_truth transport is localizer-only")
            return GroundTruthLocalizer(desc)
        if desc.transport == "simulated":
            if desc.kind == "localizer":
                return SimulatedLocalizer(desc)
            if desc.kind == "extractor":
                return (SimulatedChatExtractor(desc) if desc.interface == "chat"
                        else SimulatedOcrExtractor(desc))
            return SimulatedChatAnalyzer(desc)
        return RemoteChatBackend(desc)

    @classmethod
    def load(cls, path: Path | None = None) -> "BackendRegistry":
        """Built-in registry, optionally extended/overridden by backends.json."""
        registry = cls()
        if path is not None:
            try:
                entries = json.loads(Path(path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise BackendError(f"cannot read backend registry {path}: {exc}") from exc
            if not isinstance(entries, list):
                raise BackendError(f"{path}: registry must be a JSON array of descriptors")
            for entry in entries:
                registry.add(BackendDescriptor.from_dict(entry))
        return registry
