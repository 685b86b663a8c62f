import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from concord.agreement import CategorySet
from concord.vqr import (
    ENV_DATA,
    VQR_MATRIX,
    IR,
    DataError,
    KappaRecord,
    area13_illustrative_table,
    load_embedded,
    matrix_classify,
    parse_kappa_csv,
    parse_matrix,
    parse_ratings_csv,
    percentile_to_class,
    write_kappa_csv,
)

HEADER = "label,parent,m,kappa_linear,kappa_vqr\n"


@pytest.fixture(scope="module")
def ds():
    return load_embedded()


def test_embedded_shape(ds):
    areas = ds.areas()
    assert len(areas) == 10
    assert sum(a.m for a in areas) == 9199
    assert len(ds.subareas()) == 43
    assert len(ds.subareas("Area 13 Economics and Statistics")) == 4
    unavailable = [r.label for r in ds.records if not r.available]
    assert unavailable == ["Infrastructur engineering"]


def test_whole_sample(ds):
    w = ds.whole_sample
    assert (w.kappa_linear, w.kappa_vqr, w.m) == (0.32, 0.38, 9199)
    assert round(100 * ds.sampling_fraction, 1) == 9.3


def test_find(ds):
    assert ds.find("Area 13").m == 590
    assert ds.find("Area 9/Informatics").parent.startswith("Area 9")
    assert ds.find("Area 1/Informatics").m == 164
    with pytest.raises(DataError, match="ambiguous"):
        ds.find("Informatics")
    with pytest.raises(DataError, match="no group"):
        ds.find("Area 42")


def test_round_trip(ds):
    again = parse_kappa_csv(ds.to_csv())
    assert tuple(r for r in again if r.label != "All Areas") == ds.records


def test_env_override(tmp_path, monkeypatch, ds):
    p = tmp_path / "alt.csv"
    p.write_text(
        HEADER + "A,,10,0.1,0.2\nB,,20,0.2,0.3\nC,,30,0.3,na\n" + "All Areas,,60,0.2,0.2\n", encoding="utf-8"
    )
    monkeypatch.setenv(ENV_DATA, str(p))
    alt = load_embedded()
    assert [r.label for r in alt.areas()] == ["A", "B", "C"]
    assert alt.source == str(p)
    monkeypatch.delenv(ENV_DATA)
    assert load_embedded().records == ds.records


def test_inconsistent_sums_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text(HEADER + "A,,10,0.1,0.2\nA1,A,4,0.1,0.2\nA2,A,5,0.1,0.2\n", encoding="utf-8")
    with pytest.raises(DataError, match="sub-area m sum 9 != area m 10"):
        load_embedded(p)


@pytest.mark.parametrize(
    "body, msg",
    [
        ("", "line 1"),
        ("label,m\n", "line 1: expected header"),
        (HEADER + "A,,10,0,32,0.3\n", "line 2: .*decimal commas"),
        (HEADER + "A,,10,\"0,32\",0.3\n", "line 2: kappa_linear .*decimal commas"),
        (HEADER + "A,,0,0.3,0.3\n", "line 2: m must be >= 1"),
        (HEADER + "A,,x,0.3,0.3\n", "line 2: m is not an integer"),
        (HEADER + "A,,5,1.3,0.3\n", r"line 2: kappa_linear must lie in \[-1, 1\]"),
        (HEADER + "\n,,5,0.3,0.3\n", "line 3: empty label"),
    ],
)
def test_kappa_csv_errors(body, msg):
    with pytest.raises(DataError, match=msg):
        parse_kappa_csv(body)


def test_na_parsed():
    (r,) = parse_kappa_csv(HEADER + "A,,10,na,NA\n")
    assert not r.available and r.kappa_linear is None
    with pytest.raises(DataError, match="unknown weighting"):
        r.kappa("quadratic")


@given(
    st.lists(
        st.tuples(
            st.text(st.characters(blacklist_categories=("Cs", "Cc")), min_size=1).filter(
                lambda s: s.strip() == s and s.lower() != "na"
            ),
            st.integers(1, 10**6),
            st.one_of(st.none(), st.floats(-1, 1)),
            st.one_of(st.none(), st.floats(-1, 1)),
        ),
        max_size=20,
    )
)
def test_property_csv_round_trip(rows):
    recs = [KappaRecord(lab, None, m, a, b) for lab, m, a, b in rows]
    buf = io.StringIO()
    write_kappa_csv(recs, buf)
    assert parse_kappa_csv(buf.getvalue()) == recs


# ---------------------------------------------------------------------------
# ratings


def test_parse_ratings_groups():
    text = "unit_id,rating_a,rating_b,group\nu1,A,B,g1\nu2,D,D,g1\nu1,C,C,g2\n"
    data = parse_ratings_csv(text)
    assert set(data.groups) == {("g1", ""), ("g2", "")}
    assert data.groups[("g1", "")][0].rating_b == 1
    assert len(data.pairs) == 3


@pytest.mark.parametrize(
    "text, msg",
    [
        ("", "line 1"),
        ("id,a,b\n", "line 1: expected header"),
        ("unit_id,rating_a,rating_b\nu1,A,E\n", "line 2: unknown rating 'E'"),
        ("unit_id,rating_a,rating_b\nu1,A\n", "line 2: expected 3 fields"),
        ("unit_id,rating_a,rating_b\nu1,A,B\nu1,B,B\n", "line 3: duplicate unit_id"),
        ("unit_id,rating_a,rating_b\n", "no observations"),
    ],
)
def test_parse_ratings_errors(text, msg):
    with pytest.raises(DataError, match=msg):
        parse_ratings_csv(text)


def test_parse_ratings_custom_categories():
    cats = CategorySet.from_labels(["hi", "mid", "lo"])
    data = parse_ratings_csv("unit_id,rating_a,rating_b\n1,hi,lo\n", cats)
    assert data.pairs[0].rating_b == 2


def test_area13_table_marginals():
    t = area13_illustrative_table()
    assert t.row_totals.tolist() == [198, 102, 103, 187]
    assert t.col_totals.tolist() == [116, 174, 129, 171]
    assert np.diag(t.counts).tolist() == [98, 56, 39, 118]


# ---------------------------------------------------------------------------
# classification rules


@pytest.mark.parametrize(
    "pct, label", [(100, "A"), (80, "A"), (79.99, "B"), (60, "B"), (59, "C"), (50, "C"), (49.9, "D"), (0, "D")]
)
def test_percentile_to_class(pct, label):
    assert percentile_to_class(pct).label == label


def test_percentile_out_of_range():
    with pytest.raises(DataError):
        percentile_to_class(101)


def test_matrix_classify():
    assert matrix_classify(1, 1) == "A"
    assert matrix_classify(1, 4) == IR
    assert matrix_classify(3, 1) == IR
    assert matrix_classify(4, 4) == "D"
    with pytest.raises(DataError, match="1..4"):
        matrix_classify(0, 1)


def test_parse_matrix():
    text = "A A A IR\nB B B IR\nIR C C C\nIR D D D\n"
    assert parse_matrix(text) == VQR_MATRIX
    with pytest.raises(DataError, match="4 non-empty lines"):
        parse_matrix("A A A A\n")
    with pytest.raises(DataError, match="invalid matrix cell"):
        parse_matrix(text.replace("IR C", "X C"))
