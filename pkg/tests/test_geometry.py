import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twistband.errors import MaskError, TooFewNodesError
from twistband.geometry import GeometrySpec, build_grid, parse_mask, render_mask


def test_rectangle_interior_count():
    grid = build_grid(GeometrySpec.rectangle(1.0, 0.7, 0.05))
    assert grid.nnodes == 19 * 13
    assert grid.shape == "rectangle"
    # strictly inside, centered at the origin
    assert np.all(np.abs(grid.nodes[:, 0]) < 0.5)
    assert np.all(np.abs(grid.nodes[:, 1]) < 0.35)


def test_rectangle_area_exact_when_commensurate():
    # interior cells undercount by one boundary layer: (n-1)h per side
    grid = build_grid(GeometrySpec.rectangle(1.0, 1.0, 1.0 / 32))
    assert grid.area == pytest.approx(31 * 31 / 32**2)


def test_disc_area_converges_first_order():
    errs = []
    for h in (1.0 / 40, 1.0 / 80):
        grid = build_grid(GeometrySpec.disc(1.0, h))
        errs.append(abs(grid.area - np.pi))
        assert abs(grid.area - np.pi) < 2 * np.pi * h
    assert errs[1] < errs[0]


def test_too_few_nodes():
    with pytest.raises(TooFewNodesError):
        build_grid(GeometrySpec.rectangle(1.0, 1.0, 0.5))


def test_mask_roundtrip(tmp_path):
    grid = build_grid(GeometrySpec.disc(1.0, 1.0 / 12))
    text = render_mask(grid)
    p = tmp_path / "omega.mask"
    p.write_text(text)
    grid2 = build_grid(GeometrySpec.mask(str(p)))
    assert grid2.nnodes == grid.nnodes
    assert np.allclose(np.sort(grid2.nodes[:, 0]), np.sort(grid.nodes[:, 0]), atol=1e-12)
    assert grid2.area == pytest.approx(grid.area)


def test_mask_errors(tmp_path):
    with pytest.raises(MaskError):
        build_grid(GeometrySpec.mask(str(tmp_path / "missing.mask")))
    with pytest.raises(MaskError):
        parse_mask("not a header\n###\n")
    with pytest.raises(MaskError):
        parse_mask("2 3 0.1\n###\n")  # row count mismatch


def test_grid_csv_dump(tmp_path):
    grid = build_grid(GeometrySpec.rectangle(0.6, 0.6, 0.1))
    path = tmp_path / "grid.csv"
    grid.dump_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[1] == "i,x1,x2"
    assert len(lines) == 2 + grid.nnodes


@settings(max_examples=20, deadline=None)
@given(
    a=st.floats(0.5, 2.0),
    b=st.floats(0.5, 2.0),
    n=st.integers(8, 30),
)
def test_rectangle_nodes_strictly_inside(a, b, n):
    grid = build_grid(GeometrySpec.rectangle(a, b, min(a, b) / n))
    x, y = grid.nodes[:, 0], grid.nodes[:, 1]
    assert np.all((np.abs(x) < a / 2) & (np.abs(y) < b / 2))
    assert grid.area == pytest.approx(grid.nnodes * grid.h**2)
