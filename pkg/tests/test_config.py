import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfaffine.config import (
    BUNDLED,
    ConfigError,
    ConfigSyntaxError,
    load_config,
    parse_config,
    parse_value,
    serialize,
)
from selfaffine.ifs import Circle, PointCloud, Segment

BASE = """
[map.1]
linear = [[1/2, 0], [1/2, 1/2]]

[map.2]
linear = [[1/2, 1/2], [0, 1/2]]
"""


def test_paper_example_contents():
    cfg = load_config("paper_example.cfg")
    assert [m.linear for m in cfg.maps] == [((0.5, 0.0), (0.5, 0.5)), ((0.5, 0.5), (0.0, 0.5))]
    assert cfg.condensation == (Circle((0.75, 0.75), 0.2),)
    assert cfg.cosc == ((0.0, 0.0), (1.0, 1.0))
    assert cfg.j_range == (4, 11)


def test_parse_value():
    assert parse_value("1/5") == 0.2
    assert parse_value("-3/4") == -0.75
    assert parse_value("1e-3") == 0.001
    assert parse_value("[[1/2, 0], [0, .5]]") == [[0.5, 0.0], [0.0, 0.5]]
    assert parse_value("[]") == []
    for bad in ("[1, 2", "1/0", "abc", "[1 2]", "1 2", ""):
        with pytest.raises(ValueError):
            parse_value(bad)


def test_empty_map_list():
    with pytest.raises(ConfigError, match="map"):
        parse_config("[condensation.1]\ntype = points\npoints = [[0, 0]]\n")


def test_non_contracting_named():
    text = BASE + "\n[map.3]\nlinear = [[1.2, 0], [0, 0.5]]\n"
    with pytest.raises(ConfigError, match=r"map\.3.*map 3 is not contracting"):
        parse_config(text)


def test_syntax_errors_carry_line():
    with pytest.raises(ConfigSyntaxError) as exc:
        parse_config(BASE + "\nthis is not a pair\n")
    assert exc.value.line == 8
    with pytest.raises(ConfigSyntaxError):
        parse_config("[map.1\nlinear = [[0.5, 0], [0, 0.5]]\n")
    with pytest.raises(ConfigSyntaxError):
        parse_config("[map.1]\nlinear = [[0.5, 0], [0, 0.5\n")


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="map.1.colour"):
        parse_config(BASE.replace("[map.1]", "[map.1]\ncolour = 3"))
    with pytest.raises(ConfigError):
        parse_config(BASE + "\n[mystery]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config(BASE + "\n[condensation.1]\ntype = circle\ncenter = [0, 0]\nradius = 1\nsides = 4\n")


def test_semantic_errors():
    with pytest.raises(ConfigError, match="map.2.linear"):
        parse_config(BASE.replace("[[1/2, 1/2], [0, 1/2]]", "[[1/2, 1/2, 0], [0, 1/2, 0]]"))
    with pytest.raises(ConfigError, match="map.1.linear"):
        parse_config(BASE.replace("[[1/2, 0], [1/2, 1/2]]", "[[1/2, 1/2], [1/2, 1/2]]"))
    with pytest.raises(ConfigError, match="condensation.1.center"):
        parse_config(BASE + "\n[condensation.1]\ntype = circle\ncenter = [0, 0, 0]\nradius = 1\n")
    with pytest.raises(ConfigError, match="ball"):
        parse_config(BASE + "\n[ball]\ncenter = [5, 5]\nradius = 1\n")
    with pytest.raises(ConfigError, match="scales"):
        parse_config(BASE + "\n[scales]\njmin = 5\njmax = 6\n")


def test_three_dimensional_points_only():
    text = "[map.1]\nlinear = [[1/2,0,0],[0,1/2,0],[0,0,1/2]]\n[condensation.1]\ntype = points\npoints = [[0,0,0]]\n"
    assert parse_config(text).dim == 3
    with pytest.raises(ConfigError):
        parse_config(text.replace("type = points\npoints = [[0,0,0]]", "type = segment\np = [0,0,0]\nq = [1,1,1]"))


@pytest.mark.parametrize("path", sorted(BUNDLED.glob("*.cfg")), ids=lambda p: p.name)
def test_bundled_round_trip(path):
    cfg = load_config(path)
    assert parse_config(serialize(cfg)) == cfg
    assert serialize(parse_config(serialize(cfg))) == serialize(cfg)


finite = st.floats(min_value=-0.45, max_value=0.45, allow_nan=False, allow_subnormal=False)
coords = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_subnormal=False)


@settings(max_examples=100, deadline=None)
@given(
    mats=st.lists(st.tuples(finite, finite, finite, finite), min_size=1, max_size=4),
    trans=st.lists(st.tuples(coords, coords), min_size=4, max_size=4),
    pts=st.lists(st.tuples(coords, coords), min_size=1, max_size=5),
    seg=st.tuples(coords, coords, coords, coords),
    seed=st.integers(0, 2**31),
)
def test_round_trip_property(mats, trans, pts, seg, seed):
    blocks = []
    for i, (a, b, c, d) in enumerate(mats, start=1):
        if abs(a * d - b * c) < 1e-6:
            d = d + 0.01 if d < 0.4 else d - 0.01
            if abs(a * d - b * c) < 1e-6:
                a, b, c, d = 0.3, 0.0, 0.0, 0.3
        blocks.append(f"[map.{i}]\nlinear = [[{a!r}, {b!r}], [{c!r}, {d!r}]]\ntranslation = [{trans[i - 1][0]!r}, {trans[i - 1][1]!r}]\n")
    blocks.append("[condensation.1]\ntype = points\npoints = [" + ", ".join(f"[{x!r}, {y!r}]" for x, y in pts) + "]\n")
    blocks.append(f"[condensation.2]\ntype = segment\np = [{seg[0]!r}, {seg[1]!r}]\nq = [{seg[2]!r}, {seg[3]!r}]\n")
    blocks.append(f"[run]\nseed = {seed}\n")
    cfg = parse_config("\n".join(blocks))
    again = parse_config(serialize(cfg))
    assert again == cfg
    assert isinstance(cfg.condensation[0], PointCloud) and isinstance(cfg.condensation[1], Segment)
    np.testing.assert_array_equal(cfg.ifs().linears, again.ifs().linears)
