from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from concord.audit import (
    AuditError,
    ClassCounts,
    concordance_rate,
    consensus_estimate,
    format_percent,
)
from concord.vqr import AREA13_AUDIT

INPUTS = (
    AREA13_AUDIT["biblio"],
    AREA13_AUDIT["ir"],
    AREA13_AUDIT["concordant_peers"],
    AREA13_AUDIT["concordant_biblio_ir"],
)


def test_area13_table_rows():
    t = consensus_estimate(*INPUTS)
    assert t.row5_gev_evaluated.values == (63, 101, 108, 54)
    assert t.row5_gev_evaluated.total == 326
    assert [format_percent(f) for f in t.row6_gev_share] == ["54.3%", "58.0%", "83.7%", "31.6%"]
    assert format_percent(t.row6_total) == "55.3%"
    assert t.row7_gev_concordant_with_biblio.values == (45, -17, 18, 1)
    assert t.row7_total == 64
    assert t.row6_gev_share[0] == Fraction(63, 116)


def test_rendered_rows():
    rows = dict(consensus_estimate(*INPUTS).rows())
    assert rows["(7=4-3) panel-evaluated, concordant with biblio"] == ["45", "-17", "18", "1", "64"]
    assert rows["(1) bibliometric evaluation"][-1] == "590"
    assert len(rows) == 7


def test_assumptions_carried():
    t = consensus_estimate(*INPUTS)
    assert len(t.assumptions) == 3
    assert all(h.startswith(f"H{i}") for i, h in enumerate(t.assumptions, 1))
    assert "lower bounds" in t.note


@pytest.mark.parametrize(
    "args, msg",
    [
        (((1, 2, 3, 4), (1, 2, 3, 5), (0, 0, 0, 0), (0, 0, 0, 0)), "totals differ"),
        (((1, 2, 3, 4), (1, 2, 3, 4), (2, 0, 0, 0), (0, 0, 0, 0)), "exceeds ir"),
        (((1, 2, 3, 4), (4, 3, 2, 1), (0, 0, 0, 0), (2, 0, 0, 0)), "exceeds a marginal"),
        (((1, 2, 3, 4), (1, 2, 3, 4), (0, -1, 0, 0), (0, 0, 0, 0)), "negative"),
        (((1, 2, 3), (1, 2, 3, 4), (0, 0, 0, 0), (0, 0, 0, 0)), "expected 4"),
    ],
)
def test_validation(args, msg):
    with pytest.raises(AuditError, match=msg):
        consensus_estimate(*args)


def test_zero_class_share_undefined():
    t = consensus_estimate((2, 0), (2, 0), (1, 0), (1, 0), labels=("X", "Y"))
    assert t.row6_gev_share[1] is None
    assert format_percent(None) == "undefined"


@pytest.mark.parametrize(
    "f, text",
    [
        (Fraction(1, 16), "6.3%"),  # 6.25 rounds up
        (Fraction(1, 8), "12.5%"),
        (Fraction(0), "0.0%"),
        (Fraction(1), "100.0%"),
        (Fraction(2, 3), "66.7%"),
        (Fraction(1, 1000), "0.1%"),
        (Fraction(1, 2001), "0.0%"),
    ],
)
def test_format_percent_half_up(f, text):
    assert format_percent(f) == text


def test_concordance_rate():
    r = concordance_rate(117, 264)
    assert r.percent == 44.3 and r.mismatch(44.3) is None
    r = concordance_rate(705, 3441)
    assert r.percent == 20.5
    assert "21.1%" in r.mismatch(21.1)
    with pytest.raises(AuditError):
        concordance_rate(1, 0)
    with pytest.raises(AuditError):
        concordance_rate(5, 4)


def test_class_counts_ops():
    a = ClassCounts((5, 4, 3, 2))
    b = ClassCounts((1, 1, 1, 1))
    assert (a - b).values == (4, 3, 2, 1)
    assert a["C"] == 3 and a.total == 14


cls4 = st.lists(st.integers(0, 200), min_size=4, max_size=4)


@given(cls4, st.data())
def test_property_rows_consistent(ir, data):
    peers = [data.draw(st.integers(0, v)) for v in ir]
    biblio = data.draw(st.permutations(ir))
    both = [data.draw(st.integers(0, min(a, b))) for a, b in zip(biblio, ir)]
    t = consensus_estimate(biblio, ir, peers, both)
    assert t.row5_gev_evaluated.total == sum(ir) - sum(peers)
    assert all(v >= 0 for v in t.row5_gev_evaluated.values)
    assert t.row7_total == sum(max(0, b - p) for b, p in zip(both, peers))
    for share, r5, r2 in zip(t.row6_gev_share, t.row5_gev_evaluated.values, ir):
        assert share is None if r2 == 0 else 0 <= share <= 1 and share == Fraction(r5, r2)
