"""Codebook-driven ingestion, validation, and filtering of categorical tables.

A table holds level-coded cells in an ``(I, Q)`` int32 array with a
``MISSING`` sentinel of -1. Missing is never a level of its own: level
dictionaries map observed or declared labels to small non-negative codes,
and the empty string always round-trips as missing.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from foundmine.errors import ParseError, SchemaError, ValidationError

log = logging.getLogger(__name__)

MISSING = -1

DEFAULT_MIN_FREQ = 0.01


@dataclass(frozen=True)
class AttributeSpec:
    """One codebook entry: a named attribute with optional declared levels."""

    name: str
    declared_levels: tuple[str, ...] | None = None
    missing_tokens: tuple[str, ...] = ("",)


@dataclass(frozen=True)
class Codebook:
    """Machine form of an attribute inventory."""

    attributes: tuple[AttributeSpec, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if any(not n for n in names):
            raise ValidationError("codebook attribute names must be non-empty")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate codebook attribute names: {dupes}")
        for a in self.attributes:
            declared = set(a.declared_levels or ())
            clash = declared & set(a.missing_tokens)
            if clash:
                raise ValidationError(
                    f"attribute {a.name!r}: missing tokens {sorted(clash)} "
                    "collide with declared levels"
                )

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @classmethod
    def from_json(cls, source) -> "Codebook":
        """Load from a JSON document {"attributes": [{name, levels?, missing_tokens?}]}."""
        if isinstance(source, (str, Path)):
            with open(source, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        else:
            doc = json.load(source)
        try:
            entries = doc["attributes"]
        except (KeyError, TypeError):
            raise SchemaError("codebook JSON must contain an 'attributes' list")
        attrs = []
        for e in entries:
            if "name" not in e:
                raise SchemaError(f"codebook entry without a name: {e!r}")
            levels = e.get("levels")
            tokens = e.get("missing_tokens", [""])
            attrs.append(
                AttributeSpec(
                    name=str(e["name"]),
                    declared_levels=tuple(levels) if levels is not None else None,
                    missing_tokens=tuple(tokens),
                )
            )
        return cls(attributes=tuple(attrs))

    def to_json(self, path=None) -> str:
        doc = {
            "attributes": [
                {
                    "name": a.name,
                    **(
                        {"levels": list(a.declared_levels)}
                        if a.declared_levels is not None
                        else {}
                    ),
                    "missing_tokens": list(a.missing_tokens),
                }
                for a in self.attributes
            ]
        }
        text = json.dumps(doc, indent=2)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text


class CategoricalTable:
    """An immutable I x Q nominal matrix with per-attribute level dictionaries."""

    def __init__(
        self,
        attr_names: Sequence[str],
        levels: Sequence[Sequence[str]],
        cells: np.ndarray,
        provenance: str = "",
    ):
        self.attr_names = list(attr_names)
        self.levels = [list(lv) for lv in levels]
        cells = np.asarray(cells, dtype=np.int32)
        if cells.ndim != 2 or cells.shape[1] != len(self.attr_names):
            raise ValidationError(
                f"cells shape {cells.shape} does not match {len(self.attr_names)} attributes"
            )
        if len(self.levels) != len(self.attr_names):
            raise ValidationError("one level dictionary required per attribute")
        for q, lv in enumerate(self.levels):
            if len(set(lv)) != len(lv):
                raise ValidationError(
                    f"attribute {self.attr_names[q]!r}: duplicate level labels"
                )
            col = cells[:, q]
            bad = col[(col != MISSING) & ((col < 0) | (col >= len(lv)))]
            if bad.size:
                raise ValidationError(
                    f"attribute {self.attr_names[q]!r}: cell code {int(bad[0])} "
                    f"outside its {len(lv)}-level dictionary"
                )
        self.cells = cells
        self.cells.flags.writeable = False
        self.provenance = provenance
        self._index = [{lab: i for i, lab in enumerate(lv)} for lv in self.levels]

    @property
    def n_rows(self) -> int:
        return self.cells.shape[0]

    @property
    def n_cols(self) -> int:
        return self.cells.shape[1]

    def attr_index(self, name: str) -> int:
        try:
            return self.attr_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown attribute {name!r}")

    def level_index(self, attr: str, label: str) -> int:
        q = self.attr_index(attr)
        try:
            return self._index[q][label]
        except KeyError:
            raise ValidationError(f"unknown level {label!r} of attribute {attr!r}")

    def level_counts(self, q: int) -> np.ndarray:
        """Occurrence count per level code of attribute q (missing excluded)."""
        col = self.cells[:, q]
        col = col[col != MISSING]
        return np.bincount(col, minlength=len(self.levels[q])).astype(np.int64)

    def n_missing(self) -> int:
        return int((self.cells == MISSING).sum())

    def with_column(
        self, name: str, labels: Sequence[str], codes: np.ndarray
    ) -> "CategoricalTable":
        """Return a copy with one appended derived attribute."""
        if name in self.attr_names:
            raise ValidationError(f"attribute {name!r} already present")
        codes = np.asarray(codes, dtype=np.int32).reshape(-1, 1)
        if codes.shape[0] != self.n_rows:
            raise ValidationError("derived column length does not match table")
        return CategoricalTable(
            self.attr_names + [name],
            self.levels + [list(labels)],
            np.hstack([self.cells, codes]),
            provenance=self.provenance,
        )

    def __eq__(self, other):
        return (
            isinstance(other, CategoricalTable)
            and self.attr_names == other.attr_names
            and self.levels == other.levels
            and np.array_equal(self.cells, other.cells)
        )


@dataclass(frozen=True)
class FilterClause:
    attribute: str
    op: str  # IN or NOT_IN
    labels: frozenset

    def __post_init__(self):
        if self.op not in ("IN", "NOT_IN"):
            raise ValidationError(f"unknown filter operator {self.op!r}")
        if not self.labels:
            raise ValidationError("filter clause needs at least one label")


@dataclass(frozen=True)
class RowFilter:
    """Conjunction of IN / NOT_IN clauses over attribute labels."""

    clauses: tuple[FilterClause, ...] = ()

    @classmethod
    def from_spec(cls, spec: Iterable[dict]) -> "RowFilter":
        clauses = []
        for c in spec:
            clauses.append(
                FilterClause(
                    attribute=c["attribute"],
                    op=c.get("op", "IN"),
                    labels=frozenset(c["labels"]),
                )
            )
        return cls(clauses=tuple(clauses))


@dataclass
class LevelPlan:
    """Retained/suppressed level partition used to build indicator matrices.

    ``suppressed`` maps level index -> reason (rare, missing, manual); the
    MISSING sentinel appears under index -1 with reason "missing".
    Attributes with fewer than two retained levels are excluded from
    ``active`` and listed in ``dropped``.
    """

    min_freq: float
    attr_names: list[str]
    retained: dict = field(default_factory=dict)  # name -> sorted level indices
    suppressed: dict = field(default_factory=dict)  # name -> {index: reason}
    active: list[str] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)


def _resolve_lines(source, delimiter):
    if isinstance(source, (str, Path)):
        fh = open(source, "r", encoding="utf-8", newline="")
        close = True
    elif isinstance(source, io.TextIOBase):
        fh = source
        close = False
    else:
        fh = iter(source)
        close = False
    return csv.reader(fh, delimiter=delimiter), (fh if close else None)


def load_table(codebook: Codebook, source, delimiter: str = ",") -> CategoricalTable:
    """Read delimited rows into a table under a codebook.

    The header must contain exactly the codebook attribute names in any
    order. Cells matching an attribute's missing tokens (the empty string
    always counts) become MISSING; labels absent from the codebook are
    appended to the level dictionary in order of first occurrence.
    """
    reader, to_close = _resolve_lines(source, delimiter)
    try:
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty input: no header row")
        cb_names = codebook.names
        missing_cols = [n for n in cb_names if n not in header]
        extra_cols = [n for n in header if n not in cb_names]
        if missing_cols or extra_cols:
            raise SchemaError(
                "header does not match codebook"
                + (f"; absent: {missing_cols}" if missing_cols else "")
                + (f"; unexpected: {extra_cols}" if extra_cols else "")
            )
        if len(set(header)) != len(header):
            raise SchemaError("header contains duplicate column names")
        src_pos = [header.index(n) for n in cb_names]

        levels = [list(a.declared_levels or ()) for a in codebook.attributes]
        index = [{lab: i for i, lab in enumerate(lv)} for lv in levels]
        miss = [set(a.missing_tokens) | {""} for a in codebook.attributes]

        rows = []
        width = len(header)
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != width:
                raise ParseError(
                    f"line {lineno}: expected {width} fields, got {len(rec)}"
                )
            out = np.empty(len(cb_names), dtype=np.int32)
            for q, pos in enumerate(src_pos):
                cell = rec[pos]
                if cell in miss[q]:
                    out[q] = MISSING
                else:
                    code = index[q].get(cell)
                    if code is None:
                        code = len(levels[q])
                        levels[q].append(cell)
                        index[q][cell] = code
                    out[q] = code
            rows.append(out)
    finally:
        if to_close is not None:
            to_close.close()

    cells = (
        np.vstack(rows) if rows else np.empty((0, len(cb_names)), dtype=np.int32)
    )
    src_name = source if isinstance(source, (str, Path)) else "stream"
    return CategoricalTable(cb_names, levels, cells, provenance=str(src_name))


def save_table(table: CategoricalTable, dest, delimiter: str = ",") -> None:
    """Serialize back to delimited text; MISSING renders as empty string."""
    if isinstance(dest, (str, Path)):
        fh = open(dest, "w", encoding="utf-8", newline="")
        close = True
    else:
        fh = dest
        close = False
    try:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(table.attr_names)
        for i in range(table.n_rows):
            row = table.cells[i]
            writer.writerow(
                [
                    "" if row[q] == MISSING else table.levels[q][row[q]]
                    for q in range(table.n_cols)
                ]
            )
    finally:
        if close:
            fh.close()


def missingness_mask(table: CategoricalTable) -> np.ndarray:
    """I x Q binary matrix: 1 marks a missing cell."""
    return (table.cells == MISSING).astype(np.uint8)


def build_level_plan(
    table: CategoricalTable,
    min_freq: float = DEFAULT_MIN_FREQ,
    manual_suppress: Iterable[str] = (),
) -> LevelPlan:
    """Partition each attribute's levels into retained and suppressed.

    A level survives when its relative frequency is at least ``min_freq``
    and its label is not manually suppressed; missing is always
    suppressed. Attributes left with fewer than two retained levels are
    dropped from the plan entirely (logged as a warning).
    """
    if not (0 <= min_freq < 1):
        raise ValidationError(f"min_freq must be in [0, 1), got {min_freq}")
    manual = set(manual_suppress)
    plan = LevelPlan(min_freq=min_freq, attr_names=list(table.attr_names))
    n = table.n_rows
    for q, name in enumerate(table.attr_names):
        counts = table.level_counts(q)
        retained = []
        suppressed = {-1: "missing"}
        for li, label in enumerate(table.levels[q]):
            if label in manual:
                suppressed[li] = "manual"
            elif n == 0 or counts[li] / n < min_freq:
                suppressed[li] = "rare"
            else:
                retained.append(li)
        plan.retained[name] = retained
        plan.suppressed[name] = suppressed
        if len(retained) >= 2:
            plan.active.append(name)
        else:
            plan.dropped.append(name)
    if plan.dropped:
        log.warning(
            "level plan dropped %d attribute(s) with <2 retained levels: %s",
            len(plan.dropped),
            ", ".join(plan.dropped),
        )
    return plan


def validate_filter(table: CategoricalTable, row_filter: RowFilter) -> None:
    for clause in row_filter.clauses:
        q = table.attr_index(clause.attribute)
        known = set(table.levels[q])
        unknown = sorted(set(clause.labels) - known)
        if unknown:
            raise ValidationError(
                f"filter on {clause.attribute!r} references unknown labels: {unknown}"
            )


def filter_rows(table: CategoricalTable, row_filter: RowFilter) -> CategoricalTable:
    """Keep exactly the rows satisfying every clause; level codes stay stable.

    Missing cells never match an IN set and always satisfy NOT_IN.
    """
    validate_filter(table, row_filter)
    keep = np.ones(table.n_rows, dtype=bool)
    for clause in row_filter.clauses:
        q = table.attr_index(clause.attribute)
        codes = np.array(
            [table.level_index(clause.attribute, lab) for lab in sorted(clause.labels)],
            dtype=np.int32,
        )
        hit = np.isin(table.cells[:, q], codes)
        keep &= hit if clause.op == "IN" else ~hit
    return CategoricalTable(
        table.attr_names,
        table.levels,
        table.cells[keep],
        provenance=table.provenance + " (filtered)",
    )
