"""Wire behavior of the extraction and analysis stages.

Covers crop chunking, the ``<i> text </i>`` tagged-string codec, prompt
assembly from versioned template fixtures, and strict parsing/alignment of
backend responses. Everything here is pure; retries and missing-crop
bookkeeping belong to the orchestrator.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Any

from .core import PhiCategory

ANALYSIS_TEMPLATE = "analysis-v1.txt"
EXTRACT_TEMPLATE = "extract-v1.txt"


class ProtocolError(Exception):
    """Malformed tagged string, response body, or id bookkeeping."""


class SchemaError(ProtocolError):
    """Response body does not parse as the required JSON schema."""


class AlignmentError(ProtocolError):
    """Extraction response ids do not match the chunk that was sent."""


@dataclass(frozen=True)
class Chunk:
    """One batch of crops sent in a single backend call."""

    chunk_index: int
    crop_refs: tuple[tuple[str, str], ...]  # (image_id, imprint_id) in send order


@dataclass(frozen=True)
class AnalysisResult:
    id: int
    classification: str  # "PHI" | "non-PHI"
    category: PhiCategory | None
    rationale: str


@dataclass(frozen=True)
class AnalysisResponse:
    results: tuple[AnalysisResult, ...]
    unclassified_ids: tuple[int, ...]  # sent but absent from the body


def chunk_crops(crops: list[tuple[str, str]], chunk_size: int) -> list[Chunk]:
    """Partition crops into order-preserving chunks of at most chunk_size."""
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    return [
        Chunk(chunk_index=i // chunk_size, crop_refs=tuple(crops[i : i + chunk_size]))
        for i in range(0, len(crops), chunk_size)
    ]


def encode_tagged(texts: list[str]) -> list[str]:
    """Wrap each text as ``<i> text </i>`` with i counting from 0."""
    return [f"<{i}> {text} </{i}>" for i, text in enumerate(texts)]


_TAG_RE = re.compile(r"^<(\d+)>\s?(.*?)\s?</(\d+)>$", re.DOTALL)


def decode_tagged(tagged: list[str]) -> list[tuple[int, str]]:
    """Inverse of encode_tagged; strict about tag shape and index uniqueness."""
    out: list[tuple[int, str]] = []
    seen: set[int] = set()
    for pos, element in enumerate(tagged):
        m = _TAG_RE.match(element)
        if not m:
            raise ProtocolError(f"element {pos}: malformed tag in {element!r}")
        open_idx, payload, close_idx = int(m.group(1)), m.group(2), int(m.group(3))
        if open_idx != close_idx:
            raise ProtocolError(
                f"element {pos}: mismatched tags <{open_idx}> vs </{close_idx}>"
            )
        if open_idx in seen:
            raise ProtocolError(f"element {pos}: duplicate index {open_idx}")
        seen.add(open_idx)
        out.append((open_idx, payload))
    return out


def _load_template(name: str) -> str:
    return resources.files("deid_bench.prompts").joinpath(name).read_text(encoding="utf-8")


_template_cache: dict[str, str] = {}


def template_text(name: str) -> str:
    if name not in _template_cache:
        _template_cache[name] = _load_template(name)
    return _template_cache[name]


def prompt_hash() -> str:
    """Hash over both template fixtures; recorded in every run report."""
    h = hashlib.sha256()
    for name in (ANALYSIS_TEMPLATE, EXTRACT_TEMPLATE):
        h.update(name.encode("ascii"))
        h.update(template_text(name).encode("utf-8"))
    return h.hexdigest()


def build_analysis_prompt(tagged: list[str]) -> str:
    """Three fixed sections (definitions, instructions, output format)
    followed by the tagged input verbatim, one element per line."""
    if not tagged:
        raise ValueError("analysis prompt requires at least one tagged string")
    return template_text(ANALYSIS_TEMPLATE) + "\n".join(tagged) + "\n"


def build_extract_prompt(n_crops: int) -> str:
    if n_crops < 1:
        raise ValueError("extraction prompt requires at least one crop")
    return template_text(EXTRACT_TEMPLATE) + f"\nThe batch contains {n_crops} crops.\n"


_FENCE_RE = re.compile(r"^\s*```[a-zA-Z]*\s*(.*?)\s*```\s*$", re.DOTALL)


def strip_fence(body: str) -> str:
    m = _FENCE_RE.match(body)
    return m.group(1) if m else body.strip()


def parse_analysis_response(body: str, sent_ids: set[int]) -> AnalysisResponse:
    """Strict parse of the analysis JSON.

    Unknown ids are rejected outright; ids that were sent but not answered
    are reported back as unclassified so the caller can decide to retry.
    """
    try:
        data = json.loads(strip_fence(body))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"analysis body is not JSON: {exc.msg}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("results"), list):
        raise SchemaError("analysis body must be an object with a 'results' array")

    results: list[AnalysisResult] = []
    seen: set[int] = set()
    for pos, item in enumerate(data["results"]):
        if not isinstance(item, dict):
            raise SchemaError(f"results[{pos}] is not an object")
        try:
            rid = int(item["id"])
            classification = str(item["classification"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"results[{pos}]: {exc}") from exc
        if rid not in sent_ids:
            raise SchemaError(f"results[{pos}]: unknown id {rid}")
        if rid in seen:
            raise SchemaError(f"results[{pos}]: duplicate id {rid}")
        seen.add(rid)
        if classification not in ("PHI", "non-PHI"):
            raise SchemaError(f"results[{pos}]: bad classification {classification!r}")
        raw_cat = item.get("category")
        category = PhiCategory.parse(raw_cat) if raw_cat else None
        if (classification == "PHI") != (category is not None):
            raise SchemaError(
                f"results[{pos}]: classification {classification!r} inconsistent "
                f"with category {raw_cat!r}"
            )
        results.append(
            AnalysisResult(
                id=rid,
                classification=classification,
                category=category,
                rationale=str(item.get("rationale", "")),
            )
        )
    unclassified = tuple(sorted(sent_ids - seen))
    return AnalysisResponse(results=tuple(results), unclassified_ids=unclassified)


def align_extraction(chunk: Chunk, body: str) -> list[tuple[tuple[str, str], str]]:
    """Match an id-keyed extraction body back to the chunk's crops.

    The id set must equal the chunk's exactly; anything else is an
    alignment error. Output is ordered by id, i.e. original crop order.
    """
    try:
        data = json.loads(strip_fence(body))
    except json.JSONDecodeError as exc:
        raise AlignmentError(f"chunk {chunk.chunk_index}: body is not JSON: {exc.msg}") from exc
    if not isinstance(data, list):
        raise AlignmentError(f"chunk {chunk.chunk_index}: body must be a JSON array")

    expected = set(range(len(chunk.crop_refs)))
    by_id: dict[int, str] = {}
    for pos, item in enumerate(data):
        if not isinstance(item, dict) or "id" not in item or "text" not in item:
            raise AlignmentError(
                f"chunk {chunk.chunk_index}: element {pos} must be {{id, text}}"
            )
        rid = int(item["id"])
        if rid not in expected:
            raise AlignmentError(f"chunk {chunk.chunk_index}: unexpected id {rid}")
        if rid in by_id:
            raise AlignmentError(f"chunk {chunk.chunk_index}: duplicate id {rid}")
        by_id[rid] = str(item["text"])
    if set(by_id) != expected:
        missing = sorted(expected - set(by_id))
        raise AlignmentError(f"chunk {chunk.chunk_index}: missing ids {missing}")
    return [(chunk.crop_refs[i], by_id[i]) for i in sorted(by_id)]


def verdict_wire_body(items: list[dict[str, Any]]) -> str:
    """Render analysis results into the documented JSON wire form."""
    return json.dumps({"results": items}, sort_keys=True)


def extraction_wire_body(texts: list[str]) -> str:
    """Render chunk extraction output into the documented JSON wire form."""
    return json.dumps([{"id": i, "text": t} for i, t in enumerate(texts)])
