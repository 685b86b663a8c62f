"""Monte Carlo checks for the kappa asymptotics and the funnel test.

Randomness comes from numpy's Philox counter-based generator. Replications
are processed in fixed-size blocks and block ``b`` draws from the substream
``SeedSequence(seed, spawn_key=(b,))``, so results do not depend on how many
workers run the blocks or in which order they finish.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .agreement import AgreementError, ContingencyTable, WeightScheme, kappa_arrays

__all__ = [
    "JointDistribution",
    "SimConfig",
    "SECalibration",
    "CoverageReport",
    "substream",
    "sample_table",
    "se_calibration",
    "coverage_study",
    "SimulationError",
    "PRESET_JOINTS",
]

BLOCK = 1000  # replications per substream


class SimulationError(ValueError):
    pass


def substream(seed: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class JointDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 2:
            raise SimulationError(f"joint must be k x k with k >= 2, got shape {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise SimulationError("joint probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise SimulationError(f"joint probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def from_counts(cls, counts) -> "JointDistribution":
        c = np.asarray(counts, dtype=float)
        return cls(c / c.sum())

    @classmethod
    def independent(cls, row, col) -> "JointDistribution":
        row = np.asarray(row, dtype=float)
        col = np.asarray(col, dtype=float)
        return cls(np.outer(row / row.sum(), col / col.sum()))


@dataclass(frozen=True)
class SimConfig:
    seed: int
    replications: int
    n_per_table: int = 1000
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise SimulationError("replications must be >= 1")
        if self.n_per_table < 1:
            raise SimulationError("n_per_table must be >= 1")
        if self.workers < 1:
            raise SimulationError("workers must be >= 1")


def _blocks(replications: int) -> list[tuple[int, int, int]]:
    """(block index, first replication, size)."""
    return [(b, start, min(BLOCK, replications - start)) for b, start in enumerate(range(0, replications, BLOCK))]


def _run_blocks(fn, cfg: SimConfig) -> list:
    blocks = _blocks(cfg.replications)
    if cfg.workers == 1:
        return [fn(*blk) for blk in blocks]
    with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
        return list(ex.map(lambda blk: fn(*blk), blocks))


def sample_table(joint: JointDistribution, n: int, seed: int) -> ContingencyTable:
    """Multinomial draw of ``n`` units over the cells of ``joint``."""
    if n < 1:
        raise SimulationError("n must be >= 1")
    rng = substream(seed)
    counts = rng.multinomial(n, joint.probs.ravel())
    return ContingencyTable(counts.reshape(joint.k, joint.k))


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SECalibration:
    empirical_sd: float
    mean_se: float
    relative_gap: float
    replications: int
    n_per_table: int
    weights: str
    kappa_true: float
    se_true: float
    undefined_draws: int
    flagged: bool


def se_calibration(
    joint: JointDistribution, w: WeightScheme, cfg: SimConfig, tolerance: float = 0.05
) -> SECalibration:
    """Compare the spread of kappa-hat over simulated tables with its asymptotic SE.

    ``flagged`` is set when the relative gap exceeds ``tolerance`` on a run
    large enough for the comparison to be meaningful (>= 10^4 replications
    of tables with >= 1000 units).
    """
    if w.k != joint.k:
        raise AgreementError(f"weight scheme is {w.k}x{w.k} but joint is {joint.k}x{joint.k}")
    truth = kappa_arrays(joint.probs, w.d)
    if not truth["q_e"] > 0:
        raise SimulationError("degenerate joint: chance disagreement is 0, kappa undefined")
    k = joint.k
    flat = joint.probs.ravel()
    n = cfg.n_per_table

    def block(b, start, size):
        rng = substream(cfg.seed, b)
        counts = rng.multinomial(n, flat, size=size).reshape(size, k, k)
        r = kappa_arrays(counts, w.d)
        return r["kappa"], np.sqrt(np.clip(r["var"], 0.0, None))

    parts = _run_blocks(block, cfg)
    kap = np.concatenate([p[0] for p in parts])
    se = np.concatenate([p[1] for p in parts])
    ok = np.isfinite(kap)
    undefined = int((~ok).sum())
    kap, se = kap[ok], se[ok]
    if kap.size < 2:
        raise SimulationError("fewer than 2 simulated tables had a defined kappa")
    mean_k = math.fsum(kap) / kap.size
    sd = math.sqrt(math.fsum((kap - mean_k) ** 2) / (kap.size - 1))
    mean_se = math.fsum(se) / se.size
    if mean_se == 0:
        gap = 0.0 if sd == 0 else math.inf
    else:
        gap = abs(sd - mean_se) / mean_se
    big_enough = cfg.replications >= 10_000 and n >= 1000
    return SECalibration(
        empirical_sd=sd,
        mean_se=mean_se,
        relative_gap=gap,
        replications=cfg.replications,
        n_per_table=n,
        weights=w.name,
        kappa_true=float(truth["kappa"]),
        se_true=math.sqrt(max(float(truth["var"]), 0.0) / n),
        undefined_draws=undefined,
        flagged=bool(big_enough and gap > tolerance),
    )


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverageReport:
    rejections: int
    replications: int
    level: float

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.replications

    @property
    def coverage(self) -> float:
        return 1.0 - self.rejection_rate


def _held_out_t(K_fit: np.ndarray, m_fit: np.ndarray, k_held: np.ndarray, m_held: float) -> np.ndarray:
    """Vectorised fit on the rows of ``K_fit`` and t statistic of ``k_held``."""
    total = m_fit.sum()
    mu = K_fit @ m_fit / total
    df = K_fit.shape[1] - 1
    s2 = ((K_fit - mu[:, None]) ** 2) @ m_fit / df
    se = np.sqrt(s2) * math.sqrt(1.0 / m_held + 1.0 / total)
    dev = k_held - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        t = dev / se
    # sigma2_hat = 0 carries no evidence against the null
    zero = se == 0
    t[zero] = np.where(dev[zero] == 0, 0.0, np.copysign(np.inf, dev[zero]))
    return t


def coverage_study(
    mu: float,
    sigma2: float,
    m_list: Sequence[int],
    cfg: SimConfig,
    level: float = 0.95,
    heldout: tuple[int, float] | None = None,
) -> CoverageReport:
    """Rejection rate of the two-sided held-out test under the normal model.

    Each replication draws ``k_j ~ N(mu, sigma2 / m_j)`` for every group.
    Without ``heldout``, replication r holds out group ``r mod len(m_list)``,
    fits the rest and tests it. With ``heldout=(m, shift)``, all of
    ``m_list`` is fitted and an extra group of size m drawn around
    ``mu + shift`` is tested, which measures power.
    """
    m = np.asarray(m_list, dtype=float)
    if sigma2 < 0:
        raise SimulationError("sigma2 must be >= 0")
    if not 0 < level < 1:
        raise SimulationError("level must lie strictly between 0 and 1")
    if np.any(m < 1):
        raise SimulationError("group sizes must be >= 1")
    G = len(m)
    if heldout is None and G < 4:
        raise SimulationError("need >= 4 groups per replication (3 fitted + 1 held out)")
    if heldout is not None and G < 3:
        raise SimulationError("need >= 3 fitted groups")
    if heldout is not None and heldout[0] < 1:
        raise SimulationError("held-out group size must be >= 1")
    if sigma2 == 0 and (heldout is None or heldout[1] == 0):
        # every draw equals mu; t is defined as 0 and nothing is rejected
        return CoverageReport(rejections=0, replications=cfg.replications, level=level)
    sd = np.sqrt(sigma2 / m)

    if heldout is None:
        crit = stats.t.ppf((1 + level) / 2, G - 2)

        def block(b, start, size):
            rng = substream(cfg.seed, b)
            K = mu + rng.standard_normal((size, G)) * sd
            h_of = (start + np.arange(size)) % G
            rejected = 0
            for h in range(G):
                rows = h_of == h
                if not rows.any():
                    continue
                keep = np.arange(G) != h
                t = _held_out_t(K[rows][:, keep], m[keep], K[rows, h], m[h])
                rejected += int(np.count_nonzero(np.abs(t) > crit))
            return rejected

    else:
        m0, shift = heldout
        crit = stats.t.ppf((1 + level) / 2, G - 1)
        sd0 = math.sqrt(sigma2 / m0)

        def block(b, start, size):
            rng = substream(cfg.seed, b)
            Z = rng.standard_normal((size, G + 1))
            K = mu + Z[:, :G] * sd
            k0 = mu + shift + Z[:, G] * sd0
            t = _held_out_t(K, m, k0, m0)
            return int(np.count_nonzero(np.abs(t) > crit))

    rejections = sum(_run_blocks(block, cfg))
    return CoverageReport(rejections=rejections, replications=cfg.replications, level=level)


# Full-support 4x4 joints used for calibration runs. "area13" is the
# normalised illustrative Area 13 table; the other two bracket it with a
# strongly diagonal and a weak, skewed pattern.
PRESET_JOINTS = {
    "area13": np.array(
        [[98, 47, 30, 23], [6, 56, 30, 10], [6, 38, 39, 20], [6, 33, 30, 118]], dtype=float
    )
    / 590,
    "diagonal": np.array(
        [[20, 4, 1, 1], [4, 18, 4, 1], [1, 4, 16, 4], [1, 1, 4, 16]], dtype=float
    )
    / 100,
    "skewed": np.array(
        [[5, 6, 3, 1], [4, 10, 8, 3], [2, 7, 12, 9], [1, 3, 8, 18]], dtype=float
    )
    / 100,
}
