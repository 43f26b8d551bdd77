"""Imprint text synthesizers and the matching category patterns.

The generator draws PHI texts per category and non-PHI texts from a
technical-label pool; the rule-based analyzer classifies with the *same*
patterns, so on clean generated text it reproduces ground-truth labels
exactly. That oracle property is what the acceptance tests lean on, which
is why the pools and the rules live together in one module.

The synthesized distributions are this harness's own; the source corpora do
not publish theirs. Formats are fixed and documented here:

* dates: ``YYYYMMDD`` (1950-2024, day capped at 28)
* phones: ``(NNN) NNN-NNNN`` or ``NNN-NNN-NNNN``
* identifiers: ``MRN NNNNNNN``, ``PID-NNNNNN``, ``ACC NNNNNNNN`` (the ACC
  digit block never starts with 19/20, so it can never shadow a date)
* emails: ``first.last[NN]@domain``
* addresses: ``N{1,4} StreetName Suffix``
"""

from __future__ import annotations

import random
import re

from .core import PhiCategory

FIRST_NAMES = [
    "John", "Mary", "James", "Linda", "Robert", "Patricia", "Michael", "Barbara",
    "William", "Susan", "David", "Jessica", "Richard", "Sarah", "Joseph", "Karen",
    "Thomas", "Nancy", "Carlos", "Emma", "Ahmed", "Fatima", "Wei", "Yuki",
]

LAST_NAMES = [
    "Doe", "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller",
    "Davis", "Rodriguez", "Martinez", "Hernandez", "Lopez", "Wilson", "Anderson",
    "Thomas", "Taylor", "Moore", "Nguyen", "Kim", "Chen", "Patel", "Okafor", "Tanaka",
]

STREET_NAMES = [
    "Oak", "Maple", "Cedar", "Elmwood", "Birch", "Willow", "Juniper", "Magnolia",
    "Sycamore", "Aspen", "Hawthorn", "Linden",
]

STREET_SUFFIXES = ["St", "Ave", "Rd", "Blvd", "Ln", "Dr"]

EMAIL_DOMAINS = ["example.org", "mailhub.net", "clinicmail.com"]

NAME_TEMPLATES = [
    "{first} {last}",
    "Patient name: {first} {last}",
    "PT: {last}, {first}",
]

# Placeholders carry a field label but no value; weaker analyzers are known
# to flag them, so the ground truth pins them as non-PHI.
PLACEHOLDERS = ["PATIENT NAME", "IDENTIFIER", "DOB:", "ADDRESS:", "PATIENT ID"]

TECHNICAL_LABELS = [
    "CT HEAD W/O CONTRAST",
    "MRI BRAIN T2 FLAIR",
    "PORTABLE CHEST",
    "US ABDOMEN COMPLETE",
    "W:400 L:40",
    "W:1500 L:-600",
    "KVP 120",
    "SLICE 12/48",
    "SERIES 4",
    "STUDY 4821",
    "FOV 32CM",
    "GANTRY TILT 0.0",
    "RECON KERNEL B30F",
    "EXP 2.5 MAS 180",
]


def synth_name(rng: random.Random) -> str:
    template = rng.choice(NAME_TEMPLATES)
    return template.format(first=rng.choice(FIRST_NAMES), last=rng.choice(LAST_NAMES))


def synth_address(rng: random.Random) -> str:
    return (
        f"{rng.randint(1, 9999)} {rng.choice(STREET_NAMES)} {rng.choice(STREET_SUFFIXES)}"
    )


def synth_identifier(rng: random.Random) -> str:
    kind = rng.randrange(3)
    if kind == 0:
        return f"MRN {rng.randint(1000000, 9999999)}"
    if kind == 1:
        return f"PID-{rng.randint(100000, 999999)}"
    # Leading digit 3-9 keeps the 8-digit block out of the date pattern.
    return f"ACC {rng.randint(3, 9)}{rng.randint(0, 9999999):07d}"


def synth_date(rng: random.Random) -> str:
    year = rng.randint(1950, 2024)
    month = rng.randint(1, 12)
    day = rng.randint(1, 28)
    return f"{year:04d}{month:02d}{day:02d}"


def synth_phone(rng: random.Random) -> str:
    area = rng.randint(200, 999)
    mid = rng.randint(0, 999)
    tail = rng.randint(0, 9999)
    if rng.random() < 0.5:
        return f"({area}) {mid:03d}-{tail:04d}"
    return f"{area}-{mid:03d}-{tail:04d}"


def synth_email(rng: random.Random) -> str:
    first = rng.choice(FIRST_NAMES).lower()
    last = rng.choice(LAST_NAMES).lower()
    suffix = str(rng.randint(1, 99)) if rng.random() < 0.4 else ""
    return f"{first}.{last}{suffix}@{rng.choice(EMAIL_DOMAINS)}"


def synth_nonphi(rng: random.Random) -> str:
    kind = rng.random()
    if kind < 0.2:
        return rng.choice(PLACEHOLDERS)
    if kind < 0.3:
        return f"Age: {rng.randint(18, 95)}"
    return rng.choice(TECHNICAL_LABELS)


PHI_SYNTHESIZERS = {
    PhiCategory.NAME: synth_name,
    PhiCategory.ADDRESS: synth_address,
    PhiCategory.IDENTIFIER: synth_identifier,
    PhiCategory.DATE: synth_date,
    PhiCategory.PHONE: synth_phone,
    PhiCategory.EMAIL: synth_email,
}


def synth_phi(rng: random.Random, category: PhiCategory) -> str:
    return PHI_SYNTHESIZERS[category](rng)


# --- classification rules -------------------------------------------------

_DATE_RE = re.compile(r"\b(19|20)\d{2}(0[1-9]|1[0-2])(0[1-9]|1\d|2[0-8])\b")
_PHONE_RE = re.compile(r"(\(\d{3}\) \d{3}-\d{4}|\b\d{3}-\d{3}-\d{4}\b)")
_EMAIL_RE = re.compile(r"\b[\w.+-]+@[\w-]+\.[\w.]+\b")
_IDENTIFIER_RE = re.compile(r"\b(MRN \d{7}|PID-\d{6}|ACC \d{8})\b")
_ADDRESS_RE = re.compile(
    r"\b\d{1,4} (%s) (%s)\b" % ("|".join(STREET_NAMES), "|".join(STREET_SUFFIXES))
)
_NAME_PAIR_RE = re.compile(
    r"\b(%s) (%s)\b" % ("|".join(FIRST_NAMES), "|".join(LAST_NAMES))
)
_NAME_REVERSED_RE = re.compile(
    r"\b(%s), (%s)\b" % ("|".join(LAST_NAMES), "|".join(FIRST_NAMES))
)

_PLACEHOLDER_SET = {p.upper() for p in PLACEHOLDERS}


def classify_text(text: str) -> list[tuple[PhiCategory, str]]:
    """All PHI terms found in ``text``, in order of position.

    Returns (category, matched term) pairs; an empty list means non-PHI.
    Placeholders (field labels without a value) are explicitly non-PHI.
    """
    stripped = text.strip()
    if stripped.upper() in _PLACEHOLDER_SET:
        return []

    hits: list[tuple[int, PhiCategory, str]] = []
    for category, pattern in (
        (PhiCategory.EMAIL, _EMAIL_RE),
        (PhiCategory.PHONE, _PHONE_RE),
        (PhiCategory.DATE, _DATE_RE),
        (PhiCategory.IDENTIFIER, _IDENTIFIER_RE),
        (PhiCategory.ADDRESS, _ADDRESS_RE),
        (PhiCategory.NAME, _NAME_PAIR_RE),
        (PhiCategory.NAME, _NAME_REVERSED_RE),
    ):
        for m in pattern.finditer(stripped):
            hits.append((m.start(), category, m.group(0)))
    hits.sort(key=lambda h: h[0])

    # Overlapping matches collapse to the earliest: one term per span.
    result: list[tuple[PhiCategory, str]] = []
    covered_end = -1
    for start, category, term in hits:
        if start <= covered_end:
            continue
        result.append((category, term))
        covered_end = start + len(term) - 1
    return result
