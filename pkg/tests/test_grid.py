import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracshape.errors import ParameterError, StructuralError
from fracshape.grid import (DomainMask, GridFunction, build_grid, empty_mask,
                            full_mask, grid_from_json, grid_to_json, l2_inner,
                            mask_from_indices, mask_from_json, mask_to_json,
                            translate_mask)


def test_build_grid_basic():
    g = build_grid(1, 4.0, 64)
    assert g.h == pytest.approx(0.125)
    assert g.n_cells == 64
    assert g.cell_volume == pytest.approx(0.125)
    centers = g.cell_centers
    assert centers.shape == (64, 1)
    assert centers[0, 0] == pytest.approx(-4.0 + 0.0625)
    assert centers[-1, 0] == pytest.approx(4.0 - 0.0625)


def test_build_grid_2d_ordering():
    g = build_grid(2, 1.0, 4)
    assert g.n_cells == 16
    centers = g.cell_centers
    # C order: second axis varies fastest
    assert centers[0, 0] == centers[1, 0]
    assert centers[0, 1] != centers[1, 1]
    flat = g.flat_index(g.multi_index(np.arange(16)))
    assert np.array_equal(flat, np.arange(16))


@pytest.mark.parametrize("kwargs", [
    dict(dim=3, half_width=1.0, resolution=4),
    dict(dim=1, half_width=0.0, resolution=4),
    dict(dim=1, half_width=1.0, resolution=1),
    dict(dim=2, half_width=1.0, resolution=200),
])
def test_build_grid_rejects(kwargs):
    with pytest.raises(ParameterError):
        build_grid(**kwargs)


def test_mask_volume_and_subset():
    g = build_grid(1, 4.0, 64)
    inner = mask_from_indices(g, [10, 11, 12])
    outer = mask_from_indices(g, [9, 10, 11, 12, 13])
    assert inner.volume == pytest.approx(3 * g.cell_volume)
    assert inner.is_subset_of(outer)
    assert not outer.is_subset_of(inner)
    assert empty_mask(g).is_empty
    assert full_mask(g).n_active == 64


def test_mask_grid_mismatch():
    g1 = build_grid(1, 4.0, 64)
    g2 = build_grid(1, 4.0, 32)
    with pytest.raises(StructuralError):
        mask_from_indices(g1, [0]).is_subset_of(mask_from_indices(g2, [0]))


def test_translate_mask():
    g = build_grid(1, 4.0, 64)
    m = mask_from_indices(g, [10, 11])
    t = translate_mask(m, [5])
    assert np.array_equal(t.active_indices, [15, 16])
    with pytest.raises(ParameterError):
        translate_mask(m, [60])


def test_translate_mask_2d():
    g = build_grid(2, 1.0, 8)
    m = mask_from_indices(g, g.flat_index(np.array([[3, 3], [3, 4]])))
    t = translate_mask(m, [1, -2])
    expected = g.flat_index(np.array([[4, 1], [4, 2]]))
    assert np.array_equal(np.sort(t.active_indices), np.sort(expected))


def test_grid_function_l2():
    g = build_grid(1, 2.0, 16)
    u = GridFunction(g, np.ones(16))
    assert u.l2_norm_sq() == pytest.approx(4.0)
    v = GridFunction(g, np.arange(16.0))
    assert l2_inner(u, v) == pytest.approx(g.cell_volume * np.arange(16.0).sum())


def test_grid_function_shape_check():
    g = build_grid(1, 2.0, 16)
    with pytest.raises(StructuralError):
        GridFunction(g, np.ones(8))


def test_grid_json_roundtrip():
    g = build_grid(2, 3.0, 12)
    assert grid_from_json(grid_to_json(g)) == g


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=63), min_size=0, max_size=40))
def test_mask_json_roundtrip(indices):
    g = build_grid(1, 4.0, 64)
    m = mask_from_indices(g, indices) if indices else empty_mask(g)
    back = mask_from_json(mask_to_json(m))
    assert np.array_equal(back.cells, m.cells)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=55), st.integers(min_value=-8, max_value=8))
def test_translate_preserves_count(start, shift):
    g = build_grid(1, 4.0, 64)
    m = mask_from_indices(g, range(start, start + 8))
    if 0 <= start + shift and start + shift + 8 <= 64:
        t = translate_mask(m, [shift])
        assert t.n_active == m.n_active
    else:
        with pytest.raises(ParameterError):
            translate_mask(m, [shift])
