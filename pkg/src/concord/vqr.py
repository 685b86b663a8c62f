"""VQR 2004-2010 data and classification rules.

The published agreement data of the IR-vs-bibliometrics experiment (kappas
per area and sub-area, the Area 13 audit counts, reference p-values), the
20-20-10-50 distribution rule, the GEV 5 bibliometric matrix, and parsers
for user-supplied ratings, kappa tables and matrices.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, TextIO

import numpy as np

from .agreement import CategorySet, ContingencyTable, MeritClass, RatingPair
from .meta import AreaGroups, GroupKappa

__all__ = [
    "KappaRecord",
    "EmbeddedDataset",
    "RatingsData",
    "VqrDistributionRule",
    "ClassificationMatrix",
    "DataError",
    "dataset_from_records",
    "load_embedded",
    "ENV_DATA",
    "VQR_RULE",
    "VQR_MATRIX",
    "MERIT_NAMES",
    "REFERENCE_PVALUES",
    "AREA13_AUDIT",
    "percentile_to_class",
    "matrix_classify",
    "parse_matrix",
    "parse_ratings_csv",
    "parse_kappa_csv",
    "write_kappa_csv",
    "area13_illustrative_table",
]

ENV_DATA = "CONCORD_EMBEDDED_DATA"
KAPPA_HEADER = ["label", "parent", "m", "kappa_linear", "kappa_vqr"]
WHOLE_SAMPLE_LABEL = "All Areas"
WEIGHTINGS = ("linear", "vqr")

POPULATION = 99005  # articles submitted in the bibliometric areas and Area 13
SAMPLE_SIZE = 9199


class DataError(ValueError):
    """Malformed or inconsistent input data."""


# --------------------------------------------------------------------------
# kappa tables


@dataclass(frozen=True)
class KappaRecord:
    """One row of a kappa table: a group with its linear- and VQR-weighted kappas."""

    label: str
    parent: str | None
    m: int
    kappa_linear: float | None
    kappa_vqr: float | None

    @property
    def available(self) -> bool:
        return self.kappa_linear is not None and self.kappa_vqr is not None

    def kappa(self, weighting: str) -> float | None:
        if weighting not in WEIGHTINGS:
            raise DataError(f"unknown weighting {weighting!r}; valid: {', '.join(WEIGHTINGS)}")
        return self.kappa_linear if weighting == "linear" else self.kappa_vqr

    def group(self, weighting: str) -> GroupKappa:
        return GroupKappa(self.label, self.m, self.kappa(weighting), self.parent)


def _fmt_kappa(x: float | None) -> str:
    return "na" if x is None else repr(x)


def _parse_kappa_field(text: str, lineno: int, col: str) -> float | None:
    t = text.strip()
    if t.lower() == "na":
        return None
    try:
        x = float(t)
    except ValueError:
        hint = " (decimal commas are not accepted)" if "," in t else ""
        raise DataError(f"line {lineno}: {col} is not a number: {t!r}{hint}") from None
    if not math.isfinite(x) or not -1 <= x <= 1:
        raise DataError(f"line {lineno}: {col} must lie in [-1, 1], got {t}")
    return x


def parse_kappa_csv(stream: TextIO | str) -> list[KappaRecord]:
    """Parse a ``label,parent,m,kappa_linear,kappa_vqr`` table.

    ``parent`` is empty for top-level groups; kappas may be ``na``.
    """
    text = stream if isinstance(stream, str) else stream.read()
    reader = csv.reader(io.StringIO(text.lstrip("﻿"), newline=""))
    rows = iter(enumerate(reader, start=1))
    try:
        _, header = next(rows)
    except StopIteration:
        raise DataError("line 1: empty file, header required") from None
    if [h.strip() for h in header] != KAPPA_HEADER:
        raise DataError(f"line 1: expected header {','.join(KAPPA_HEADER)!r}")
    out = []
    for lineno, row in rows:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(KAPPA_HEADER):
            raise DataError(
                f"line {lineno}: expected {len(KAPPA_HEADER)} fields, got {len(row)}"
                " (decimal commas are not accepted)"
            )
        label, parent, m_text, kl, kv = (c.strip() for c in row)
        if not label:
            raise DataError(f"line {lineno}: empty label")
        try:
            m = int(m_text)
        except ValueError:
            raise DataError(f"line {lineno}: m is not an integer: {m_text!r}") from None
        if m < 1:
            raise DataError(f"line {lineno}: m must be >= 1")
        out.append(
            KappaRecord(
                label=label,
                parent=parent or None,
                m=m,
                kappa_linear=_parse_kappa_field(kl, lineno, "kappa_linear"),
                kappa_vqr=_parse_kappa_field(kv, lineno, "kappa_vqr"),
            )
        )
    return out


def write_kappa_csv(records: Iterable[KappaRecord], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(KAPPA_HEADER)
    for r in records:
        w.writerow([r.label, r.parent or "", r.m, _fmt_kappa(r.kappa_linear), _fmt_kappa(r.kappa_vqr)])


# --------------------------------------------------------------------------
# reference values

# Reference one-sided p-values of Area 13 and its sub-areas.
REFERENCE_PVALUES = {
    ("linear", "Area 13 Economics and Statistics"): 0.0036,
    ("vqr", "Area 13 Economics and Statistics"): 0.0086,
    ("linear", "Economics"): 0.0001,
    ("vqr", "Economics"): 0.0005,
    ("linear", "Economic history"): 0.3571,
    ("vqr", "Economic history"): 0.4711,
    ("linear", "Management"): 0.0034,
    ("vqr", "Management"): 0.0096,
    ("linear", "Statistics"): 0.0012,
    ("vqr", "Statistics"): 0.0051,
}

# Area 13 audit inputs (classes A-D) and the printed derived rows.
AREA13_AUDIT = {
    "biblio": (198, 102, 103, 187),
    "ir": (116, 174, 129, 171),
    "concordant_peers": (53, 73, 21, 117),
    "concordant_biblio_ir": (98, 56, 39, 118),
    "printed": {
        "row5": (63, 101, 108, 54, 326),
        "row6": ("54.3%", "58.0%", "83.7%", "31.6%", "55.3%"),
        "row7": (45, -17, 18, 1, 64),
    },
}

# (concordant, total, printed percent)
CONCORDANT_D = {
    "other_areas": (705, 3441, 21.1),
    "area13": (117, 264, 44.3),
}

# Values published elsewhere for the same quantities.
VARIANTS = (
    ("whole-sample VQR kappa", 0.38, 0.3441),
    ("Area 13 VQR kappa", 0.54, 0.6104),
)


@dataclass(frozen=True)
class EmbeddedDataset:
    records: tuple[KappaRecord, ...]
    whole_sample: KappaRecord | None
    population: int = POPULATION
    source: str = "embedded"
    notes: tuple[str, ...] = field(default=())

    def areas(self) -> list[KappaRecord]:
        return [r for r in self.records if r.parent is None]

    def subareas(self, area: str | None = None) -> list[KappaRecord]:
        return [r for r in self.records if r.parent is not None and (area is None or r.parent == area)]

    def area_groups(self, weighting: str) -> list[AreaGroups]:
        return [
            AreaGroups(a.group(weighting), tuple(s.group(weighting) for s in self.subareas(a.label)))
            for a in self.areas()
        ]

    def find(self, query: str) -> KappaRecord:
        return find_record(self.records, query)

    @property
    def sampling_fraction(self) -> float:
        n = self.whole_sample.m if self.whole_sample else SAMPLE_SIZE
        return n / self.population

    def to_csv(self) -> str:
        buf = io.StringIO()
        recs = list(self.records) + ([self.whole_sample] if self.whole_sample else [])
        write_kappa_csv(recs, buf)
        return buf.getvalue()


def find_record(records: Iterable[KappaRecord], query: str) -> KappaRecord:
    """Look a group up by label.

    Matches an exact label, or a label starting with ``query`` followed by a
    space ("Area 13" finds "Area 13 Economics and Statistics"). Repeated
    sub-area names are disambiguated as ``"<area>/<label>"``.
    """
    records = list(records)
    parent_q = None
    q = query.strip()
    if "/" in q:
        parent_q, q = (s.strip() for s in q.rsplit("/", 1))

    def label_match(label: str, text: str) -> bool:
        return label == text or label.startswith(text + " ")

    hits = [r for r in records if label_match(r.label, q)]
    if parent_q is not None:
        hits = [r for r in hits if r.parent is not None and label_match(r.parent, parent_q)]
    exact = [r for r in hits if r.label == q]
    if len(exact) == 1:
        return exact[0]
    if len(hits) == 1:
        return hits[0]
    if not hits:
        raise DataError(f"no group matches {query!r}")
    opts = "; ".join(f"{r.parent}/{r.label}" if r.parent else r.label for r in hits)
    raise DataError(f"{query!r} is ambiguous: {opts}")


def _validate(records: list[KappaRecord], whole: KappaRecord | None) -> list[str]:
    problems = []
    keys = set()
    area_labels = {r.label for r in records if r.parent is None}
    for r in records:
        if (r.parent, r.label) in keys:
            problems.append(f"duplicate group {r.parent}/{r.label}")
        keys.add((r.parent, r.label))
        if r.parent is not None and r.parent not in area_labels:
            problems.append(f"{r.label}: unknown parent {r.parent!r}")
    for a in area_labels:
        subs = [r for r in records if r.parent == a]
        if subs:
            area_m = next(r.m for r in records if r.label == a and r.parent is None)
            if sum(s.m for s in subs) != area_m:
                problems.append(f"{a}: sub-area m sum {sum(s.m for s in subs)} != area m {area_m}")
    if whole is not None:
        total = sum(r.m for r in records if r.parent is None)
        if total != whole.m:
            problems.append(f"area m sum {total} != whole-sample m {whole.m}")
    return problems


def dataset_from_records(recs: list[KappaRecord], source: str) -> EmbeddedDataset:
    whole = [r for r in recs if r.label == WHOLE_SAMPLE_LABEL and r.parent is None]
    body = [r for r in recs if not (r.label == WHOLE_SAMPLE_LABEL and r.parent is None)]
    problems = _validate(body, whole[0] if whole else None)
    if problems:
        raise DataError(f"{source}: inconsistent dataset: " + "; ".join(problems))
    notes = tuple(
        f"{name}: {used} used here, {alt} published elsewhere" for name, used, alt in VARIANTS
    )
    return EmbeddedDataset(tuple(body), whole[0] if whole else None, source=source, notes=notes)


def load_embedded(path: str | os.PathLike | None = None) -> EmbeddedDataset:
    """Load the published kappa table.

    ``path`` (or the ``CONCORD_EMBEDDED_DATA`` environment variable) points
    at an alternative file in the same CSV schema. The data are checked on
    load; any inconsistency raises :class:`DataError`.
    """
    if path is None:
        path = os.environ.get(ENV_DATA) or None
    if path is None:
        text = resources.files("concord").joinpath("data/kappas.csv").read_text(encoding="utf-8")
        source = "embedded"
    else:
        with open(path, encoding="utf-8", newline="") as f:
            text = f.read()
        source = os.fspath(path)
    return dataset_from_records(parse_kappa_csv(text), source)


# --------------------------------------------------------------------------
# ratings


@dataclass(frozen=True)
class RatingsData:
    cats: CategorySet
    groups: dict[tuple[str, str], list[RatingPair]]

    @property
    def pairs(self) -> list[RatingPair]:
        return [p for ps in self.groups.values() for p in ps]


def parse_ratings_csv(stream: TextIO | str, cats: CategorySet | None = None) -> RatingsData:
    """Parse ``unit_id,rating_a,rating_b[,group,subgroup]`` rows.

    Ratings are category labels from ``cats`` (default A-D). Pairs are
    grouped by (group, subgroup); missing columns group under "".
    """
    cats = cats or CategorySet.default()
    text = stream if isinstance(stream, str) else stream.read()
    reader = csv.reader(io.StringIO(text.lstrip("﻿"), newline=""))
    rows = iter(enumerate(reader, start=1))
    try:
        _, header = next(rows)
    except StopIteration:
        raise DataError("line 1: empty file, header required") from None
    header = [h.strip() for h in header]
    allowed = (
        ["unit_id", "rating_a", "rating_b"],
        ["unit_id", "rating_a", "rating_b", "group"],
        ["unit_id", "rating_a", "rating_b", "group", "subgroup"],
    )
    if header not in allowed:
        raise DataError("line 1: expected header unit_id,rating_a,rating_b[,group,subgroup]")
    width = len(header)
    groups: dict[tuple[str, str], list[RatingPair]] = {}
    seen: dict[str, set[str]] = {}
    for lineno, row in rows:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise DataError(f"line {lineno}: expected {width} fields, got {len(row)}")
        fields = [c.strip() for c in row] + [""] * (5 - width)
        unit, ra, rb, grp, sub = fields
        if not unit:
            raise DataError(f"line {lineno}: empty unit_id")
        idx = []
        for r in (ra, rb):
            try:
                idx.append(cats.index_of(r))
            except KeyError:
                raise DataError(f"line {lineno}: unknown rating {r!r}") from None
        if unit in seen.setdefault(grp, set()):
            raise DataError(f"line {lineno}: duplicate unit_id {unit!r} in group {grp!r}")
        seen[grp].add(unit)
        groups.setdefault((grp, sub), []).append(RatingPair(unit, idx[0], idx[1]))
    if not groups:
        raise DataError("no observations")
    return RatingsData(cats, groups)


def area13_illustrative_table() -> ContingencyTable:
    """One 4x4 table consistent with the published Area 13 summaries.

    Rows (bibliometrics) sum to 198, 102, 103, 187; columns (informed review)
    to 116, 174, 129, 171; the diagonal holds the 98, 56, 39, 118 concordant
    articles. The off-diagonal split was never published, so this is one
    arbitrary completion, useful as a realistic worked example only.
    """
    return ContingencyTable(
        np.array(
            [
                [98, 47, 30, 23],
                [6, 56, 30, 10],
                [6, 38, 39, 20],
                [6, 33, 30, 118],
            ]
        )
    )


# --------------------------------------------------------------------------
# classification rules

MERIT_NAMES = {"A": "Excellent", "B": "Good", "C": "Acceptable", "D": "Limited"}


@dataclass(frozen=True)
class VqrDistributionRule:
    """Percentile cut points, best class first.

    ``lower_bounds[i]`` is the lowest percentile (share of the world
    distribution below the item) that still earns ``cats.classes[i]``;
    each interval is closed below and open above.
    """

    lower_bounds: tuple[float, ...]
    cats: CategorySet

    def __post_init__(self):
        lb = self.lower_bounds
        if len(lb) != self.cats.k:
            raise DataError("one lower bound per class required")
        if lb[-1] != 0 or any(b >= a for a, b in zip(lb, lb[1:])) or lb[0] > 100:
            raise DataError("lower bounds must decrease strictly from <= 100 down to 0")


VQR_RULE = VqrDistributionRule((80.0, 60.0, 50.0, 0.0), CategorySet.default())


def percentile_to_class(percentile: float, rule: VqrDistributionRule = VQR_RULE) -> MeritClass:
    if not 0 <= percentile <= 100:
        raise DataError(f"percentile must lie in [0, 100], got {percentile}")
    for bound, cls in zip(rule.lower_bounds, rule.cats.classes):
        if percentile >= bound:
            return cls
    raise AssertionError("unreachable: last lower bound is 0")


IR = "IR"
_MATRIX_TOKENS = {"A", "B", "C", "D", IR}


@dataclass(frozen=True)
class ClassificationMatrix:
    """4x4 grid: rows are citation classes 1-4, columns journal-indicator classes 1-4."""

    cells: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        cells = tuple(tuple(r) for r in self.cells)
        if len(cells) != 4 or any(len(r) != 4 for r in cells):
            raise DataError("classification matrix must be 4x4")
        for r in cells:
            for c in r:
                if c not in _MATRIX_TOKENS:
                    raise DataError(f"invalid matrix cell {c!r}; expected one of A, B, C, D, IR")
        object.__setattr__(self, "cells", cells)


VQR_MATRIX = ClassificationMatrix(
    (
        ("A", "A", "A", IR),
        ("B", "B", "B", IR),
        (IR, "C", "C", "C"),
        (IR, "D", "D", "D"),
    )
)


def matrix_classify(citation_class: int, indicator_class: int, matrix: ClassificationMatrix = VQR_MATRIX) -> str:
    """Merit class label, or ``"IR"`` when the article goes to informed review."""
    for name, v in (("citation_class", citation_class), ("indicator_class", indicator_class)):
        if not 1 <= v <= 4:
            raise DataError(f"{name} must be in 1..4, got {v}")
    return matrix.cells[citation_class - 1][indicator_class - 1]


def parse_matrix(stream: TextIO | str) -> ClassificationMatrix:
    text = stream if isinstance(stream, str) else stream.read()
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if len(lines) != 4:
        raise DataError(f"classification matrix needs 4 non-empty lines, got {len(lines)}")
    for i, ln in enumerate(lines, start=1):
        if len(ln) != 4:
            raise DataError(f"matrix row {i}: expected 4 tokens, got {len(ln)}")
    return ClassificationMatrix(tuple(tuple(ln) for ln in lines))

