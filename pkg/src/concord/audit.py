"""Consensus-group audit for a dual-evaluation experiment.

Given the per-class distribution of bibliometric grades, the per-class
distribution of final informed-review grades, how many reviews had two
concordant referees, and how many final grades matched the bibliometric
one, estimate how many final grades must have been set by the panel's
consensus group rather than by agreeing referees.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = [
    "ClassCounts",
    "AuditTable",
    "ConcordanceRate",
    "AuditError",
    "HYPOTHESES",
    "consensus_estimate",
    "concordance_rate",
    "format_percent",
]

DEFAULT_CLASSES = ("A", "B", "C", "D")


class AuditError(ValueError):
    pass


@dataclass(frozen=True)
class ClassCounts:
    values: tuple[int, ...]
    labels: tuple[str, ...] = DEFAULT_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.values) != len(self.labels):
            raise AuditError(f"expected {len(self.labels)} class counts, got {len(self.values)}")

    @property
    def total(self) -> int:
        return sum(self.values)

    def __getitem__(self, label: str) -> int:
        return self.values[self.labels.index(label)]

    def __sub__(self, other: "ClassCounts") -> "ClassCounts":
        return ClassCounts(tuple(a - b for a, b in zip(self.values, other.values)), self.labels)


HYPOTHESES = (
    "H1: no article was graded D on sight by both panel members, so every "
    "article was reviewed by two referees",
    "H2: the consensus group never overrode a grade on which both referees agreed",
    "H3: whenever both referees agreed, their grade equalled the bibliometric grade "
    "(used for row 7 only)",
)
LOWER_BOUND_NOTE = "rows 5 and 7 are lower bounds under H1-H3"


@dataclass(frozen=True)
class AuditTable:
    row1_biblio: ClassCounts
    row2_ir: ClassCounts
    row3_concordant_peers: ClassCounts
    row4_concordant_biblio_ir: ClassCounts
    row5_gev_evaluated: ClassCounts
    row6_gev_share: tuple[Fraction | None, ...]
    row6_total: Fraction | None
    row7_gev_concordant_with_biblio: ClassCounts
    row7_total: int
    assumptions: tuple[str, ...] = HYPOTHESES
    note: str = LOWER_BOUND_NOTE

    @property
    def labels(self) -> tuple[str, ...]:
        return self.row1_biblio.labels

    def rows(self) -> list[tuple[str, list[str]]]:
        """Rendered rows: integer cells as-is, shares as percentages with 1 decimal."""

        def ints(c: ClassCounts):
            return [str(v) for v in c.values] + [str(c.total)]

        share = [format_percent(f) for f in self.row6_gev_share] + [format_percent(self.row6_total)]
        return [
            ("(1) bibliometric evaluation", ints(self.row1_biblio)),
            ("(2) informed peer review", ints(self.row2_ir)),
            ("(3) concordant peer reviews", ints(self.row3_concordant_peers)),
            ("(4) concordant biblio and peer ev.", ints(self.row4_concordant_biblio_ir)),
            ("(5=2-3) evaluated by panel members", ints(self.row5_gev_evaluated)),
            ("(6=5/2) % evaluated by panel members", share),
            (
                "(7=4-3) panel-evaluated, concordant with biblio",
                [str(v) for v in self.row7_gev_concordant_with_biblio.values] + [str(self.row7_total)],
            ),
        ]


def format_percent(f: Fraction | None, decimals: int = 1) -> str:
    if f is None:
        return "undefined"
    # round half up on the exact rational, not on a float
    scaled = f * 100 * 10**decimals
    q, r = divmod(scaled.numerator, scaled.denominator)
    if 2 * r >= scaled.denominator:
        q += 1
    s = str(q).rjust(decimals + 1, "0")
    return f"{s[:-decimals]}.{s[-decimals:]}%" if decimals else f"{s}%"


def _as_counts(x, labels) -> ClassCounts:
    if isinstance(x, ClassCounts):
        return x
    return ClassCounts(tuple(x), labels)


def consensus_estimate(
    biblio: ClassCounts | Sequence[int],
    ir: ClassCounts | Sequence[int],
    concordant_peers: ClassCounts | Sequence[int],
    concordant_biblio_ir: ClassCounts | Sequence[int],
    labels: Sequence[str] = DEFAULT_CLASSES,
) -> AuditTable:
    """Build the seven-row audit table.

    Row 5 (ir - concordant_peers) counts final grades that the referees did
    not settle between themselves, so the consensus group set them. Row 7
    (concordant_biblio_ir - concordant_peers) counts matches with the
    bibliometric grade not explained by referee agreement. A class cell can
    be negative, but a negative cell bounds nothing, so the row total sums
    only the positive cells.
    """
    labels = tuple(labels)
    r1, r2, r3, r4 = (_as_counts(x, labels) for x in (biblio, ir, concordant_peers, concordant_biblio_ir))
    for name, row in (("biblio", r1), ("ir", r2), ("concordant_peers", r3), ("concordant_biblio_ir", r4)):
        if row.labels != r1.labels:
            raise AuditError(f"{name}: class labels differ from biblio")
        for lab, v in zip(row.labels, row.values):
            if v < 0:
                raise AuditError(f"{name}: class {lab} is negative ({v})")
    if r1.total != r2.total:
        raise AuditError(f"totals differ: biblio {r1.total} vs ir {r2.total}")
    for lab, peers, ir_v in zip(r1.labels, r3.values, r2.values):
        if peers > ir_v:
            raise AuditError(f"class {lab}: concordant_peers ({peers}) exceeds ir ({ir_v})")
    for lab, c4, a, b in zip(r1.labels, r4.values, r1.values, r2.values):
        if c4 > min(a, b):
            raise AuditError(f"class {lab}: concordant_biblio_ir ({c4}) exceeds a marginal")

    r5 = r2 - r3
    r6 = tuple(Fraction(a, b) if b else None for a, b in zip(r5.values, r2.values))
    r6_total = Fraction(r5.total, r2.total) if r2.total else None
    r7 = r4 - r3
    r7_total = sum(max(0, v) for v in r7.values)
    return AuditTable(r1, r2, r3, r4, r5, r6, r6_total, r7, r7_total)


@dataclass(frozen=True)
class ConcordanceRate:
    concordant: int
    total: int

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.concordant, self.total)

    @property
    def percent(self) -> float:
        return float(format_percent(self.fraction).rstrip("%"))

    def mismatch(self, printed_percent: float) -> str | None:
        """Warning text if a published percentage disagrees with the ratio."""
        if abs(self.percent - printed_percent) < 0.05:
            return None
        return (
            f"{self.concordant}/{self.total} = {self.percent:.1f}%, "
            f"but {printed_percent:.1f}% is published"
        )


def concordance_rate(concordant: int, total: int) -> ConcordanceRate:
    if total <= 0:
        raise AuditError("total must be positive")
    if not 0 <= concordant <= total:
        raise AuditError("need 0 <= concordant <= total")
    return ConcordanceRate(concordant, total)
