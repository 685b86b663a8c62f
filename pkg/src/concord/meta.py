"""Funnel-plot meta-analysis of group kappas.

Each group j contributes a kappa estimated from m_j rated units and is
modelled as ``k_j ~ N(mu, sigma2 / m_j)``. Fitting the model on a reference
set of groups gives a prediction band for a new group of size m, which is
drawn as a funnel and used to test whether a held-out group is compatible
with the reference set.

Estimators
----------
mu_hat     = sum(m_j k_j) / sum(m_j)
sigma2_hat = sum(m_j (k_j - mu_hat)^2) / (n - 1)
se(m)      = sqrt(sigma2_hat) * sqrt(1/m + 1/sum(m_j))

and ``(k - mu_hat) / se(m)`` is Student-t with n - 1 degrees of freedom
under the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

__all__ = [
    "GroupKappa",
    "MetaModel",
    "PredictionBand",
    "OutlierTest",
    "AreaGroups",
    "LeaveOneOutReport",
    "MetaError",
    "fit",
    "prediction_interval",
    "funnel_points",
    "default_m_grid",
    "test_group",
    "leave_one_out",
    "multi_exceedance_probability",
    "significance_stars",
]


class MetaError(ValueError):
    pass


@dataclass(frozen=True)
class GroupKappa:
    """A group's kappa and the number of units it was computed from.

    ``kappa`` is None for groups whose kappa was not published.
    """

    label: str
    m: int
    kappa: float | None
    parent: str | None = None

    def __post_init__(self):
        if self.m < 1:
            raise MetaError(f"{self.label}: m must be >= 1")
        if self.kappa is not None and not self.kappa <= 1:
            raise MetaError(f"{self.label}: kappa must be <= 1")

    @property
    def available(self) -> bool:
        return self.kappa is not None

    @property
    def key(self) -> tuple[str | None, str]:
        return (self.parent, self.label)


@dataclass(frozen=True)
class MetaModel:
    mu_hat: float
    sigma2_hat: float
    n_groups: int
    total_m: int
    df: int
    fitted: tuple[tuple[str | None, str], ...] = field(default=(), repr=False)

    @property
    def sigma_hat(self) -> float:
        return math.sqrt(self.sigma2_hat)

    def se(self, m: float) -> float:
        return self.sigma_hat * math.sqrt(1.0 / m + 1.0 / self.total_m)


def fit(groups: Sequence[GroupKappa]) -> MetaModel:
    """Fit the heteroscedastic normal model to at least three groups."""
    groups = list(groups)
    if len(groups) < 3:
        raise MetaError(f"insufficient groups: need >= 3, got {len(groups)}")
    for g in groups:
        if not g.available:
            raise MetaError(f"{g.label}: kappa unavailable, cannot be fitted")
    m = np.array([g.m for g in groups], dtype=float)
    k = np.array([g.kappa for g in groups], dtype=float)
    total = m.sum()
    mu = math.fsum(m * k) / total
    n = len(groups)
    sigma2 = math.fsum(m * (k - mu) ** 2) / (n - 1)
    return MetaModel(
        mu_hat=mu,
        sigma2_hat=sigma2,
        n_groups=n,
        total_m=int(total),
        df=n - 1,
        fitted=tuple(g.key for g in groups),
    )


def _check_level(level: float):
    if not 0 < level < 1:
        raise MetaError("level must lie strictly between 0 and 1")


def prediction_interval(model: MetaModel, m: float, level: float = 0.95) -> tuple[float, float]:
    """Two-sided prediction interval for the kappa of a new group of size ``m``."""
    if m < 1:
        raise MetaError("m must be >= 1")
    _check_level(level)
    t = stats.t.ppf((1 + level) / 2, model.df)
    half = t * model.se(m)
    return model.mu_hat - half, model.mu_hat + half


@dataclass(frozen=True)
class PredictionBand:
    level: float
    points: tuple[tuple[float, float, float], ...]  # (m, lo, hi)
    mean: float

    @property
    def m(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def lo(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def hi(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])


def default_m_grid(ms: Sequence[float], num: int = 60) -> list[float]:
    """Log-spaced grid from min(m)/2 to 1.1 * max(m)."""
    lo = max(min(ms) / 2, 1.0)
    hi = max(ms) * 1.1
    return [float(x) for x in np.geomspace(lo, hi, num)]


def funnel_points(model: MetaModel, m_grid: Sequence[float], level: float = 0.95) -> PredictionBand:
    grid = list(m_grid)
    if not grid:
        raise MetaError("m grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise MetaError("m grid must be strictly ascending")
    pts = tuple((float(m), *prediction_interval(model, m, level)) for m in grid)
    return PredictionBand(level=level, points=pts, mean=model.mu_hat)


@dataclass(frozen=True)
class OutlierTest:
    """Result of testing one group against a fitted model.

    ``position`` locates the group against the two-sided band at ``level``
    (the band the funnel plot draws): "above", "below" or "inside".
    ``outside_band`` follows the test's own sidedness: for a one-sided test
    it is ``p < 1 - level``, i.e. above the one-sided upper limit.
    """

    label: str
    t_stat: float
    df: int
    p_value: float
    sided: str
    outside_band: bool
    position: str
    kappa: float
    m: int
    parent: str | None = None


def _t_stat(model: MetaModel, kappa: float, m: float) -> float:
    dev = kappa - model.mu_hat
    se = model.se(m)
    if se == 0:
        # sigma2_hat = 0: no spread to measure against
        return 0.0 if dev == 0 else math.copysign(math.inf, dev)
    return dev / se


def test_group(model: MetaModel, g: GroupKappa, sided: str = "one", level: float = 0.95) -> OutlierTest:
    """Studentised deviation of ``g`` from the fitted mean, with its p-value.

    ``sided="one"`` gives the upper-tail p-value (is the group's agreement
    higher than the reference groups would predict?); ``sided="two"`` the
    two-tailed one.
    """
    if sided not in ("one", "two"):
        raise MetaError("sided must be 'one' or 'two'")
    if g.m < 1:
        raise MetaError(f"{g.label}: m must be >= 1")
    if not g.available:
        raise MetaError(f"{g.label}: kappa unavailable, cannot be tested")
    if g.key in model.fitted:
        raise MetaError(f"{g.label}: group is part of the fitted reference set")
    _check_level(level)
    t = _t_stat(model, g.kappa, g.m)
    if sided == "one":
        p = float(stats.t.sf(t, model.df))
    else:
        p = float(min(1.0, 2 * stats.t.sf(abs(t), model.df)))
    alpha = 1 - level
    crit2 = stats.t.ppf(1 - alpha / 2, model.df)
    if t > crit2:
        position = "above"
    elif t < -crit2:
        position = "below"
    else:
        position = "inside"
    return OutlierTest(
        label=g.label,
        t_stat=t,
        df=model.df,
        p_value=p,
        sided=sided,
        outside_band=p < alpha,
        position=position,
        kappa=g.kappa,
        m=g.m,
        parent=g.parent,
    )


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


# --------------------------------------------------------------------------
# leave one area out


@dataclass(frozen=True)
class AreaGroups:
    area: GroupKappa
    subareas: tuple[GroupKappa, ...] = ()


@dataclass(frozen=True)
class LeaveOneOutReport:
    area: str
    area_model: MetaModel
    subarea_model: MetaModel | None
    area_test: OutlierTest
    subarea_tests: tuple[OutlierTest, ...]

    @property
    def outside(self) -> tuple[OutlierTest, ...]:
        """Held-out points lying outside the two-sided band."""
        tests = (self.area_test, *self.subarea_tests)
        return tuple(t for t in tests if t.position != "inside")


def _hold_out(areas: Sequence[AreaGroups], i: int, level: float) -> LeaveOneOutReport:
    held = areas[i]
    rest = [a for j, a in enumerate(areas) if j != i]
    area_model = fit([a.area for a in rest])
    area_test = test_group(area_model, held.area, sided="two", level=level)

    ref_subs = [s for a in rest for s in a.subareas if s.available]
    sub_model = fit(ref_subs) if len(ref_subs) >= 3 else None
    sub_tests = ()
    if sub_model is not None:
        sub_tests = tuple(
            test_group(sub_model, s, sided="two", level=level) for s in held.subareas if s.available
        )
    return LeaveOneOutReport(
        area=held.area.label,
        area_model=area_model,
        subarea_model=sub_model,
        area_test=area_test,
        subarea_tests=sub_tests,
    )


def leave_one_out(areas: Sequence[AreaGroups], level: float = 0.95) -> list[LeaveOneOutReport]:
    """Hold out each area in turn and test it and its sub-areas.

    For each area, the area-level model is fitted on the other areas' kappas
    and the sub-area model on all available sub-areas of the other areas.
    Sub-areas with unavailable kappas are skipped everywhere. Reports come
    back in input order.
    """
    areas = list(areas)
    if len(areas) < 3:
        raise MetaError(f"insufficient groups: need >= 3 areas, got {len(areas)}")
    return [_hold_out(areas, i, level) for i in range(len(areas))]


# --------------------------------------------------------------------------


def multi_exceedance_probability(trials: int, exceed: int, p_single: float = 0.025) -> float:
    """Exact ``P(X >= exceed)`` for ``X ~ Binomial(trials, p_single)``.

    With p_single = 0.025 this is the chance that ``exceed`` of ``trials``
    independent groups land above a two-sided 95% band by luck alone.
    """
    if not 0 <= exceed <= trials:
        raise MetaError("need 0 <= exceed <= trials")
    if not 0 <= p_single <= 1:
        raise MetaError("p_single must lie in [0, 1]")
    if exceed == 0:
        return 1.0
    q = 1.0 - p_single
    terms = [math.comb(trials, x) * p_single**x * q ** (trials - x) for x in range(exceed, trials + 1)]
    return min(1.0, math.fsum(terms))


# keep pytest from collecting this when imported into a test module
test_group.__test__ = False
