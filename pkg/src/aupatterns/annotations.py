"""Domain types and parsing for frame-level action-unit annotations.

The on-disk format is a plain CSV:

    subject,task,frame,AU1,AU2,...
    S1,T1,0,1,0,...

AU cells are the literal characters ``0`` or ``1``; anything else (including
intensity codes or "missing" markers) is rejected. Rows keep their file order
and each (subject, task, frame) key must be unique.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

__all__ = [
    "AnnotationError",
    "AuRegistry",
    "AuPattern",
    "AnnotatedFrame",
    "DatasetTable",
    "FrameKey",
    "registry_for_bp4d",
    "registry_for_disfa",
    "infer_registry",
    "parse_annotations",
    "serialize_annotations",
]

FrameKey = tuple[str, str, int]


class AnnotationError(ValueError):
    """Raised for any malformed annotation input."""


@dataclass(frozen=True)
class AuRegistry:
    """Ordered list of monitored AU codes; fixes the pattern width ``k``."""

    codes: tuple[int, ...]

    def __post_init__(self):
        if len(self.codes) < 1:
            raise ValueError("registry needs at least one AU code")
        if any(c <= 0 for c in self.codes):
            raise ValueError("AU codes must be positive integers")
        if any(a >= b for a, b in zip(self.codes, self.codes[1:])):
            raise ValueError("AU codes must be strictly increasing")

    @property
    def k(self) -> int:
        return len(self.codes)

    def column_names(self) -> list[str]:
        return [f"AU{c}" for c in self.codes]

    def index_of(self, code: int) -> int:
        try:
            return self.codes.index(code)
        except ValueError:
            raise KeyError(f"AU{code} not in registry") from None


def registry_for_bp4d() -> AuRegistry:
    """The 12 AU codes conventionally scored on BP4D-style tables."""
    return AuRegistry((1, 2, 4, 6, 7, 10, 12, 14, 15, 17, 23, 24))


def registry_for_disfa() -> AuRegistry:
    """The 12 AU codes conventionally scored on DISFA-style tables."""
    return AuRegistry((1, 2, 4, 5, 6, 9, 12, 15, 17, 20, 25, 26))


@dataclass(frozen=True, order=True)
class AuPattern:
    """Fixed-width occurrence bit vector (1 = active). Ordering is bitwise-
    lexicographic, i.e. plain tuple ordering of the bits."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if not self.bits:
            raise ValueError("pattern must have width >= 1")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("pattern bits must be 0 or 1")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "AuPattern":
        return cls(tuple(int(b) for b in bits))

    @classmethod
    def from_string(cls, s: str) -> "AuPattern":
        return cls(tuple(int(ch) for ch in s))

    @property
    def width(self) -> int:
        return len(self.bits)

    @property
    def n_active(self) -> int:
        return sum(self.bits)

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def active_codes(self, registry: AuRegistry) -> tuple[int, ...]:
        return tuple(c for c, b in zip(registry.codes, self.bits) if b)


@dataclass(frozen=True)
class AnnotatedFrame:
    subject_id: str
    task_id: str
    frame_index: int
    pattern: AuPattern

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")

    @property
    def key(self) -> FrameKey:
        return (self.subject_id, self.task_id, self.frame_index)


@dataclass(frozen=True)
class DatasetTable:
    """Immutable collection of annotated frames over one registry."""

    registry: AuRegistry
    frames: tuple[AnnotatedFrame, ...]
    task_emotions: Mapping[str, str] | None = None

    def __post_init__(self):
        k = self.registry.k
        seen: set[FrameKey] = set()
        for f in self.frames:
            if f.pattern.width != k:
                raise ValueError(
                    f"frame {f.key} has pattern width {f.pattern.width}, expected {k}"
                )
            if f.key in seen:
                raise AnnotationError(f"duplicate frame key {f.key}")
            seen.add(f.key)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[AnnotatedFrame]:
        return iter(self.frames)

    def subjects(self) -> tuple[str, ...]:
        """Distinct subject ids in first-appearance order."""
        out: dict[str, None] = {}
        for f in self.frames:
            out.setdefault(f.subject_id, None)
        return tuple(out)

    def tasks(self) -> tuple[str, ...]:
        out: dict[str, None] = {}
        for f in self.frames:
            out.setdefault(f.task_id, None)
        return tuple(out)

    def keys(self) -> tuple[FrameKey, ...]:
        return tuple(f.key for f in self.frames)

    def pattern_matrix(self) -> np.ndarray:
        """All frame patterns as an (n_frames, k) uint8 array in row order."""
        return np.array([f.pattern.bits for f in self.frames], dtype=np.uint8)

    def subset(self, keep: Iterable[bool]) -> "DatasetTable":
        kept = tuple(f for f, flag in zip(self.frames, keep) if flag)
        return DatasetTable(self.registry, kept, self.task_emotions)


def _header_columns(registry: AuRegistry) -> list[str]:
    return ["subject", "task", "frame"] + registry.column_names()


def infer_registry(header_line: str) -> AuRegistry:
    """Build a registry from a CSV header of the annotations format."""
    cols = next(csv.reader([header_line]))
    if cols[:3] != ["subject", "task", "frame"]:
        raise AnnotationError(
            f"header must start with subject,task,frame (got {cols[:3]})"
        )
    codes = []
    for name in cols[3:]:
        if not name.startswith("AU") or not name[2:].isdigit():
            raise AnnotationError(f"unexpected AU column name {name!r}")
        codes.append(int(name[2:]))
    try:
        return AuRegistry(tuple(codes))
    except ValueError as e:
        raise AnnotationError(f"bad AU columns in header: {e}") from None


def parse_annotations(text, registry: AuRegistry) -> DatasetTable:
    """Parse an annotations CSV into a DatasetTable.

    ``text`` may be a string or a readable text stream. LF and CRLF line
    endings are both accepted. Raises AnnotationError on a malformed header
    (naming the offending column), on any AU cell that is not the literal
    ``0`` or ``1`` (with the data row number), on duplicate frame keys, and
    on an empty data section.
    """
    if hasattr(text, "read"):
        text = text.read()
    lines = text.splitlines()
    if not lines:
        raise AnnotationError("empty input: missing header")
    rows = csv.reader(lines)
    header = next(rows)
    expected = _header_columns(registry)
    if header != expected:
        missing = [c for c in expected if c not in header]
        extra = [c for c in header if c not in expected]
        detail = []
        if missing:
            detail.append(f"missing column(s) {missing}")
        if extra:
            detail.append(f"unexpected column(s) {extra}")
        if not detail:
            detail.append(f"columns out of order (got {header})")
        raise AnnotationError("malformed header: " + "; ".join(detail))

    k = registry.k
    frames: list[AnnotatedFrame] = []
    seen: set[FrameKey] = set()
    for rownum, row in enumerate(rows, start=1):
        if not row:
            continue
        if len(row) != 3 + k:
            raise AnnotationError(
                f"row {rownum}: expected {3 + k} fields, got {len(row)}"
            )
        subject, task, frame_s = row[0], row[1], row[2]
        try:
            frame_index = int(frame_s)
        except ValueError:
            raise AnnotationError(
                f"row {rownum}: frame index {frame_s!r} is not an integer"
            ) from None
        if frame_index < 0:
            raise AnnotationError(f"row {rownum}: negative frame index {frame_index}")
        bits = []
        for name, cell in zip(registry.column_names(), row[3:]):
            if cell == "0":
                bits.append(0)
            elif cell == "1":
                bits.append(1)
            else:
                raise AnnotationError(
                    f"row {rownum}: {name} cell {cell!r} is not 0 or 1"
                )
        key = (subject, task, frame_index)
        if key in seen:
            raise AnnotationError(f"row {rownum}: duplicate frame key {key}")
        seen.add(key)
        frames.append(AnnotatedFrame(subject, task, frame_index, AuPattern(tuple(bits))))

    if not frames:
        raise AnnotationError("no frames: data section is empty")
    return DatasetTable(registry, tuple(frames))


def serialize_annotations(table: DatasetTable) -> str:
    """Inverse of parse_annotations (LF line endings)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_header_columns(table.registry))
    for f in table.frames:
        w.writerow([f.subject_id, f.task_id, f.frame_index, *f.pattern.bits])
    return buf.getvalue()
