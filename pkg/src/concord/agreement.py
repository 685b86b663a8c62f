"""Cohen's kappa for two raters over ordered categories.

Unweighted and weighted kappa, large-sample standard errors (both the
non-null form used for confidence intervals and the null form used for the
test of kappa = 0), and descriptive interpretation against the published
guideline scales.

Weights are *disagreement* weights ``d`` with zero diagonal and maximum 1;
the agreement weights entering the usual formulas are ``v = 1 - d``.

References
----------
Cohen, J. (1968). Weighted kappa. Psychological Bulletin 70(4).
Fleiss, J. L., Levin, B., Paik, M. C. (2003). Statistical Methods for Rates
and Proportions, 3rd ed., ch. 18.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

__all__ = [
    "MeritClass",
    "CategorySet",
    "RatingPair",
    "ContingencyTable",
    "WeightScheme",
    "KappaEstimate",
    "SignificanceTest",
    "AgreementError",
    "DegenerateMarginalsError",
    "build_table",
    "linear_weights",
    "vqr_weights",
    "unweighted",
    "weights_from_matrix",
    "weighted_kappa",
    "standard_error",
    "confidence_interval",
    "significance_test",
    "interpret",
    "GUIDELINES",
    "kappa_arrays",
]


class AgreementError(ValueError):
    """Invalid input to an agreement computation."""


class DegenerateMarginalsError(AgreementError):
    """Chance agreement is 1, so kappa is 0/0."""


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# categories and ratings


@dataclass(frozen=True)
class MeritClass:
    index: int
    label: str
    score: float


DEFAULT_LABELS = ("A", "B", "C", "D")
DEFAULT_SCORES = (1.0, 0.8, 0.5, 0.0)


@dataclass(frozen=True)
class CategorySet:
    """Ordered rating ladder, best class first."""

    classes: tuple[MeritClass, ...]

    def __post_init__(self):
        if len(self.classes) < 2:
            raise AgreementError("a category set needs at least 2 classes")
        labels = [c.label for c in self.classes]
        if len(set(labels)) != len(labels):
            raise AgreementError(f"duplicate category labels: {labels}")
        for i, c in enumerate(self.classes):
            if c.index != i:
                raise AgreementError("class indices must be consecutive from 0")
        scores = [c.score for c in self.classes]
        if any(b >= a for a, b in zip(scores, scores[1:])):
            raise AgreementError("class scores must be strictly decreasing")

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.classes)

    def index_of(self, label: str) -> int:
        for c in self.classes:
            if c.label == label:
                return c.index
        raise KeyError(label)

    @classmethod
    def from_labels(cls, labels: Sequence[str], scores: Sequence[float] | None = None):
        """Build a ladder; scores default to the VQR ones for 4 classes, else k-1..0."""
        labels = list(labels)
        if scores is None:
            if len(labels) == 4:
                scores = DEFAULT_SCORES
            else:
                scores = [float(len(labels) - 1 - i) for i in range(len(labels))]
        if len(scores) != len(labels):
            raise AgreementError("labels and scores differ in length")
        return cls(tuple(MeritClass(i, lab, float(s)) for i, (lab, s) in enumerate(zip(labels, scores))))

    @classmethod
    def default(cls) -> "CategorySet":
        return cls.from_labels(DEFAULT_LABELS, DEFAULT_SCORES)


@dataclass(frozen=True)
class RatingPair:
    """One unit rated by both raters; A is bibliometrics, B is informed review."""

    unit_id: str
    rating_a: int
    rating_b: int


@dataclass(frozen=True)
class ContingencyTable:
    """k x k counts; cell (i, j) = units put in class i by rater A and j by rater B."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise AgreementError(f"contingency table must be square, got shape {c.shape}")
        if c.shape[0] < 2:
            raise AgreementError("contingency table needs at least 2 categories")
        if not np.all(np.equal(np.mod(c, 1), 0)):
            raise AgreementError("counts must be integers")
        if np.any(c < 0):
            raise AgreementError("counts must be non-negative")
        if c.sum() < 1:
            raise AgreementError("no observations")
        object.__setattr__(self, "counts", _frozen(c, np.int64))

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def proportions(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.counts.T)


def build_table(pairs: Iterable[RatingPair], cats: CategorySet) -> ContingencyTable:
    """Tally rating pairs into a contingency table over ``cats``."""
    counts = np.zeros((cats.k, cats.k), dtype=np.int64)
    seen = 0
    for p in pairs:
        for r in (p.rating_a, p.rating_b):
            if not 0 <= r < cats.k:
                raise AgreementError(f"unit {p.unit_id!r}: rating index {r} out of range for k={cats.k}")
        counts[p.rating_a, p.rating_b] += 1
        seen += 1
    if seen == 0:
        raise AgreementError("no observations")
    return ContingencyTable(counts)


# --------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightScheme:
    """Symmetric disagreement weights, zero on the diagonal, maximum 1."""

    d: np.ndarray
    name: str

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 2:
            raise AgreementError(f"weight matrix must be k x k with k >= 2, got {d.shape}")
        if np.any(np.diag(d) != 0):
            raise AgreementError("disagreement weights must be 0 on the diagonal")
        if not np.array_equal(d, d.T):
            raise AgreementError("disagreement weights must be symmetric")
        if np.any(d < 0) or np.any(d > 1):
            raise AgreementError("disagreement weights must lie in [0, 1]")
        if d.max() != 1:
            raise AgreementError("largest disagreement weight must be 1")
        object.__setattr__(self, "d", _frozen(d, float))

    @property
    def k(self) -> int:
        return self.d.shape[0]

    @property
    def v(self) -> np.ndarray:
        """Agreement weights."""
        return 1.0 - self.d


def _banded(values: Sequence[float], name: str) -> WeightScheme:
    k = len(values)
    idx = np.arange(k)
    dist = np.abs(idx[:, None] - idx[None, :])
    return WeightScheme(np.asarray(values, dtype=float)[dist], name)


def linear_weights(k: int, rounded: bool = False) -> WeightScheme:
    """``d_ij = |i - j| / (k - 1)``.

    ``rounded=True`` rounds to two decimals, reproducing the printed
    (0, 0.33, 0.67, 1) for four classes.
    """
    if k < 2:
        raise AgreementError("linear weights need k >= 2")
    bands = [i / (k - 1) for i in range(k)]
    if rounded:
        bands = [round(b, 2) for b in bands]
        return _banded(bands, "linear-rounded")
    return _banded(bands, "linear")


def vqr_weights() -> WeightScheme:
    """Four-class VQR weights: distance 0, 1, 2, 3 -> 0, 0.5, 0.8, 1."""
    return _banded([0.0, 0.5, 0.8, 1.0], "vqr")


def unweighted(k: int) -> WeightScheme:
    d = 1.0 - np.eye(k)
    return WeightScheme(d, "unweighted")


def weights_from_matrix(rows: Sequence[Sequence[float]], name: str = "custom") -> WeightScheme:
    return WeightScheme(np.asarray(rows, dtype=float), name)


# --------------------------------------------------------------------------
# kappa


def kappa_arrays(counts, d) -> dict[str, np.ndarray]:
    """Vectorised kappa core over a stack of tables.

    ``counts`` has shape (..., k, k); ``d`` is the k x k disagreement matrix.
    Returns kappa, weighted observed/chance agreement, chance disagreement
    ``q_e`` and the non-null and null variances (before clamping).
    Tables with ``q_e == 0`` give nan.
    """
    counts = np.asarray(counts, dtype=float)
    d = np.asarray(d, dtype=float)
    v = 1.0 - d
    n = counts.sum(axis=(-2, -1))
    p = counts / n[..., None, None]
    pr = p.sum(axis=-1)  # rater A marginals, p_i.
    pc = p.sum(axis=-2)  # rater B marginals, p_.j
    outer = pr[..., :, None] * pc[..., None, :]

    q_o = np.sum(d * p, axis=(-2, -1))
    q_e = np.sum(d * outer, axis=(-2, -1))
    p_o = 1.0 - q_o
    p_e = 1.0 - q_e
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = 1.0 - q_o / q_e

        vbar_r = v @ pc[..., :, None]  # sum_j p_.j v_ij
        vbar_r = vbar_r[..., 0]
        vbar_c = (pr[..., None, :] @ v)[..., 0, :]  # sum_i p_i. v_ij
        vsum = vbar_r[..., :, None] + vbar_c[..., None, :]

        kk = kappa[..., None, None]
        a = np.sum(p * (v - vsum * (1.0 - kk)) ** 2, axis=(-2, -1))
        b = (kappa - p_e * (1.0 - kappa)) ** 2
        denom = n * q_e**2
        var = (a - b) / denom

        a0 = np.sum(outer * (v - vsum) ** 2, axis=(-2, -1))
        var_null = (a0 - p_e**2) / denom
    return {
        "kappa": kappa,
        "p_o": p_o,
        "p_e": p_e,
        "q_o": q_o,
        "q_e": q_e,
        "var": var,
        "var_null": var_null,
        "n": n,
    }


@dataclass(frozen=True)
class KappaEstimate:
    kappa: float
    p_o_w: float
    p_e_w: float
    n: int
    se: float
    se_null: float
    weights: str
    clamped: tuple[str, ...] = field(default=())


def _check_compatible(table: ContingencyTable, w: WeightScheme):
    if w.k != table.k:
        raise AgreementError(f"weight scheme {w.name!r} is {w.k}x{w.k} but table is {table.k}x{table.k}")


def _core(table: ContingencyTable, w: WeightScheme) -> dict[str, float]:
    _check_compatible(table, w)
    r = kappa_arrays(table.counts, w.d)
    if not r["q_e"] > 0:
        raise DegenerateMarginalsError("degenerate marginals: kappa undefined")
    return {key: float(val) for key, val in r.items()}


# Radicands below this (relative to 1/n) are rounding noise around zero.
_CLAMP_TOL = 1e-12


def _sqrt_clamped(var: float, n: float, label: str, flags: list[str]) -> float:
    if var >= 0:
        return math.sqrt(var)
    if var < -_CLAMP_TOL / n:
        # a genuinely negative radicand would mean a formula error
        flags.append(f"{label}: negative radicand {var:.3g} clamped to 0")
    else:
        flags.append(f"{label}: rounding-level negative radicand clamped to 0")
    return 0.0


def weighted_kappa(table: ContingencyTable, w: WeightScheme) -> KappaEstimate:
    """Weighted kappa with both asymptotic standard errors.

    Parameters
    ----------
    table : ContingencyTable
    w : WeightScheme
        Disagreement weights; ``unweighted(k)`` gives Cohen's original kappa.

    Returns
    -------
    KappaEstimate

    Raises
    ------
    DegenerateMarginalsError
        When both raters put every unit in the same single class.
    """
    r = _core(table, w)
    flags: list[str] = []
    se = _sqrt_clamped(r["var"], r["n"], "se", flags)
    se_null = _sqrt_clamped(r["var_null"], r["n"], "se_null", flags)
    return KappaEstimate(
        kappa=r["kappa"],
        p_o_w=r["p_o"],
        p_e_w=r["p_e"],
        n=table.n,
        se=se,
        se_null=se_null,
        weights=w.name,
        clamped=tuple(flags),
    )


def standard_error(table: ContingencyTable, w: WeightScheme, under_null: bool = False) -> float:
    est = weighted_kappa(table, w)
    return est.se_null if under_null else est.se


def confidence_interval(est: KappaEstimate, level: float = 0.95) -> tuple[float, float]:
    """Normal-theory interval ``kappa +/- z * se``; the upper end is capped at 1."""
    if not 0 < level < 1:
        raise AgreementError("level must lie strictly between 0 and 1")
    z = stats.norm.ppf((1 + level) / 2)
    half = z * est.se
    return est.kappa - half, min(1.0, est.kappa + half)


SIGNIFICANCE_CAVEAT = "significance != agreement"


@dataclass(frozen=True)
class SignificanceTest:
    """z test of kappa = 0.

    A small p-value says only that agreement beats chance; it says nothing
    about whether agreement is strong enough to be useful.
    """

    z: float
    p_value: float
    sided: str
    caveat: str = SIGNIFICANCE_CAVEAT


def significance_test(est: KappaEstimate, sided: str = "two") -> SignificanceTest:
    if sided not in ("one", "two"):
        raise AgreementError("sided must be 'one' or 'two'")
    if not est.se_null > 0:
        raise AgreementError("null standard error is 0: test undefined")
    z = est.kappa / est.se_null
    if sided == "one":
        p = float(stats.norm.sf(z))
    else:
        p = float(2 * stats.norm.sf(abs(z)))
    return SignificanceTest(z=z, p_value=min(p, 1.0), sided=sided)


# --------------------------------------------------------------------------
# interpretation

# Each band is (printed upper bound, upper bound inclusive?, descriptor).
# A value belongs to the first band it does not exceed, so values in the
# printed gaps (e.g. 0.205 for Altman) land in the upper band and values
# below every printed bound take the lowest descriptor.
_INF = math.inf
GUIDELINES: dict[str, tuple[tuple[float, bool, str], ...]] = {
    "landis_koch": (
        (0.00, False, "Poor"),
        (0.20, True, "Slight"),
        (0.40, True, "Fair"),
        (0.60, True, "Moderate"),
        (0.80, True, "Substantial"),
        (_INF, True, "Almost perfect"),
    ),
    "altman": (
        (0.20, False, "Poor"),
        (0.40, True, "Fair"),
        (0.60, True, "Moderate"),
        (0.80, True, "Good"),
        (_INF, True, "Very good"),
    ),
    "george_mallery": (
        (0.51, False, "Unacceptable"),
        (0.60, True, "Poor"),
        (0.70, True, "Questionable"),
        (0.80, True, "Acceptable"),
        (0.90, True, "Good"),
        (_INF, True, "Excellent"),
    ),
    "stemler_tsai": (
        (0.50, False, "Unacceptable"),
        (_INF, True, "Acceptable"),
    ),
    "fleiss": (
        (0.40, False, "Poor"),
        (0.75, True, "Fair to good"),
        (_INF, True, "Excellent"),
    ),
}


def interpret(kappa: float, guideline: str = "landis_koch") -> str:
    """Descriptor for ``kappa`` on one of the five guideline scales.

    >>> interpret(0.32, "landis_koch")
    'Fair'
    >>> interpret(0.54, "george_mallery")
    'Poor'
    """
    try:
        bands = GUIDELINES[guideline]
    except KeyError:
        raise AgreementError(
            f"unknown guideline {guideline!r}; valid: {', '.join(GUIDELINES)}"
        ) from None
    if math.isnan(kappa):
        raise AgreementError("kappa is nan")
    for upper, inclusive, label in bands:
        if kappa < upper or (inclusive and kappa == upper):
            return label
    return bands[-1][2]
