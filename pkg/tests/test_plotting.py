import pytest

from concord import meta, plotting, reproduce
from concord.vqr import load_embedded


@pytest.fixture(scope="module")
def ds():
    return load_embedded()


def _panel(ds, weighting="linear", units="areas", prefix=""):
    fa = reproduce.funnel_analysis(ds, weighting, units)
    return fa, fa.panel("t", prefix)


def test_svg_is_deterministic(ds):
    _, panel = _panel(ds)
    a = plotting.svg_bytes(plotting.funnel_figure([panel]))
    b = plotting.svg_bytes(plotting.funnel_figure([panel]))
    assert a == b
    assert b"<dc:date>" not in a


def test_geometry_matches_model(ds):
    for weighting in ("linear", "vqr"):
        for units in ("areas", "subareas"):
            fa, panel = _panel(ds, weighting, units, prefix="p-")
            geo = plotting.svg_geometry(plotting.svg_bytes(plotting.funnel_figure([panel])), "p-")
            assert len(geo.fitted) == len(fa.fitted)
            assert len(geo.tested) == len(fa.tested)
            assert len(geo.upper) == len(fa.band.points)
            drawn = [geo.position(pt) for pt in geo.tested]
            assert drawn == [t.position for t in fa.tests_two]
            for g, pt in zip(fa.fitted, geo.fitted):
                lo, hi = meta.prediction_interval(fa.model, g.m)
                want = "inside" if lo <= g.kappa <= hi else ("above" if g.kappa > hi else "below")
                assert geo.position(pt) == want


def test_write_svg(tmp_path, ds):
    _, panel = _panel(ds)
    out = tmp_path / "f.svg"
    plotting.write_svg(plotting.funnel_figure([panel]), out)
    assert out.read_bytes().startswith(b"<?xml")


def test_missing_group_gives_empty_geometry(ds):
    _, panel = _panel(ds)
    geo = plotting.svg_geometry(plotting.svg_bytes(plotting.funnel_figure([panel])), "nope-")
    assert geo.fitted == () and geo.upper == ()


def test_position_outside_drawn_range(ds):
    _, panel = _panel(ds)
    geo = plotting.svg_geometry(plotting.svg_bytes(plotting.funnel_figure([panel])))
    with pytest.raises(ValueError, match="outside the drawn band"):
        geo.position((-1e6, 0))
