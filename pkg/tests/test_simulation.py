import numpy as np
import pytest

from concord.agreement import linear_weights, unweighted, vqr_weights
from concord.simulation import (
    BLOCK,
    PRESET_JOINTS,
    JointDistribution,
    SimConfig,
    SimulationError,
    coverage_study,
    sample_table,
    se_calibration,
    substream,
)

M9 = [631, 1412, 927, 458, 1310, 1984, 532, 225, 1130]


def test_substreams_reproducible_and_distinct():
    a = substream(7, 0).random(5)
    assert np.array_equal(a, substream(7, 0).random(5))
    assert not np.array_equal(a, substream(7, 1).random(5))
    assert not np.array_equal(a, substream(8, 0).random(5))


def test_sample_table():
    j = JointDistribution(PRESET_JOINTS["area13"])
    t = sample_table(j, 500, seed=3)
    assert t.n == 500 and t.k == 4
    assert np.array_equal(t.counts, sample_table(j, 500, seed=3).counts)


def test_joint_validation():
    with pytest.raises(SimulationError, match="sum"):
        JointDistribution(np.full((2, 2), 0.3))
    with pytest.raises(SimulationError, match="non-negative"):
        JointDistribution(np.array([[1.5, -0.5], [0, 0]]))
    with pytest.raises(SimulationError, match="k x k"):
        JointDistribution(np.ones((2, 3)) / 6)
    ind = JointDistribution.independent([1, 3], [1, 1])
    assert ind.probs.tolist() == [[0.125, 0.125], [0.375, 0.375]]


@pytest.mark.parametrize("name", sorted(PRESET_JOINTS))
def test_presets_full_support(name):
    p = PRESET_JOINTS[name]
    assert p.shape == (4, 4) and np.all(p > 0) and abs(p.sum() - 1) < 1e-12


def test_config_validation():
    with pytest.raises(SimulationError):
        SimConfig(1, 0)
    with pytest.raises(SimulationError):
        SimConfig(1, 10, workers=0)


def test_se_calibration_deterministic_and_parallel_equal():
    j = JointDistribution(PRESET_JOINTS["skewed"])
    w = linear_weights(4)
    reps = 2 * BLOCK + 37
    a = se_calibration(j, w, SimConfig(11, reps, 300, workers=1))
    b = se_calibration(j, w, SimConfig(11, reps, 300, workers=4))
    assert a == b
    assert a.replications == reps and a.undefined_draws == 0
    # too small a run to be flagged
    assert not a.flagged
    c = se_calibration(j, w, SimConfig(12, reps, 300))
    assert c.empirical_sd != a.empirical_sd


def test_se_calibration_moderate_run_close():
    j = JointDistribution(PRESET_JOINTS["area13"])
    r = se_calibration(j, vqr_weights(), SimConfig(5, 4000, 1000))
    assert r.relative_gap < 0.08
    assert r.mean_se == pytest.approx(r.se_true, rel=0.02)


def test_se_calibration_errors():
    with pytest.raises(SimulationError, match="degenerate"):
        se_calibration(JointDistribution(np.array([[1.0, 0], [0, 0]])), unweighted(2), SimConfig(1, 10))
    with pytest.raises(ValueError, match="4x4"):
        se_calibration(JointDistribution(PRESET_JOINTS["area13"]), unweighted(3), SimConfig(1, 10))


def test_coverage_deterministic_and_parallel_equal():
    cfg1 = SimConfig(3, 5 * BLOCK + 11, workers=1)
    cfg4 = SimConfig(3, 5 * BLOCK + 11, workers=4)
    assert coverage_study(0.27, 3.3, M9, cfg1) == coverage_study(0.27, 3.3, M9, cfg4)


def test_coverage_rate_near_nominal():
    r = coverage_study(0.27, 3.3, M9, SimConfig(2, 20_000))
    assert abs(r.rejection_rate - 0.05) < 0.008
    assert r.coverage == pytest.approx(1 - r.rejection_rate)


def test_coverage_heldout_null_and_power():
    null = coverage_study(0.27, 3.3, M9, SimConfig(4, 20_000), heldout=(590, 0.0))
    assert abs(null.rejection_rate - 0.05) < 0.008
    power = coverage_study(0.27, 3.3, M9, SimConfig(4, 5_000), heldout=(590, 0.27))
    assert power.rejection_rate > 0.5


def test_coverage_zero_variance():
    r = coverage_study(0.3, 0.0, M9, SimConfig(1, 100))
    assert r.rejections == 0


@pytest.mark.parametrize(
    "kwargs, msg",
    [
        (dict(sigma2=-1), "sigma2"),
        (dict(m_list=[10, 20, 30]), ">= 4 groups"),
        (dict(m_list=[0, 20, 30, 40]), "group sizes"),
        (dict(level=1.0), "level"),
    ],
)
def test_coverage_errors(kwargs, msg):
    args = dict(mu=0.3, sigma2=1.0, m_list=M9, cfg=SimConfig(1, 10))
    args.update(kwargs)
    with pytest.raises(SimulationError, match=msg):
        coverage_study(**args)
