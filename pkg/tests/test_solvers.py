import numpy as np
import pytest
from scipy.linalg import eigh

from fracshape.errors import (DomainEmptyError, ParameterError,
                              StructuralError)
from fracshape.forms import assemble_stiffness
from fracshape.grid import (GridFunction, build_grid, empty_mask, full_mask,
                            mask_from_indices)
from fracshape.solvers import (alpha_exponent_fit, apply_resolvent,
                               capacity_estimate, eigenpairs,
                               eigenvalues_or_inf, poincare_constant,
                               resolvent_norm_diff, restrict, solve_torsion,
                               torsion_resolvent_bound_check)


@pytest.fixture(scope="module")
def base_64():
    return assemble_stiffness(build_grid(1, 4.0, 64), 0.5)


@pytest.fixture(scope="module")
def base_2d():
    return assemble_stiffness(build_grid(2, 2.0, 10), 0.5)


def test_restrict_empty_raises(base_64):
    with pytest.raises(DomainEmptyError):
        restrict(base_64, empty_mask(base_64.grid))


def test_restrict_grid_mismatch(base_64):
    other = build_grid(1, 4.0, 32)
    with pytest.raises(StructuralError):
        restrict(base_64, full_mask(other))


def test_single_cell_eigenvalue(base_64):
    # 1x1 problem: lambda = d_i / h^dim exactly
    mask = mask_from_indices(base_64.grid, [30])
    spec = eigenpairs(restrict(base_64, mask), 1)
    expected = base_64.diag[30] / base_64.grid.cell_volume
    assert spec.eigenvalues[0] == pytest.approx(expected, rel=1e-14)


def test_restriction_is_principal_submatrix(base_64):
    mask = mask_from_indices(base_64.grid, [5, 9, 20])
    op = restrict(base_64, mask)
    full = base_64.matrix()
    sub = full[np.ix_([5, 9, 20], [5, 9, 20])]
    assert np.allclose(op.matrix(), sub, rtol=0, atol=0)


@pytest.mark.parametrize("indices", [range(20, 52), [3, 7, 8, 9, 30, 31, 55]])
def test_eigenpairs_match_dense_oracle(base_64, indices):
    mask = mask_from_indices(base_64.grid, indices)
    op = restrict(base_64, mask)
    k = min(4, op.n_active)
    spec = eigenpairs(op, k)
    w, v = eigh(op.matrix() / base_64.grid.cell_volume)
    assert np.allclose(spec.eigenvalues, w[:k], rtol=1e-10)
    assert np.all(spec.residuals <= 1e-8)
    meas = base_64.grid.cell_volume
    for j in range(k):
        ef = spec.eigenfunctions[j].values[op.active_index]
        ref = v[:, j] / np.sqrt(meas * (v[:, j] @ v[:, j]))
        assert min(np.linalg.norm(ef - ref), np.linalg.norm(ef + ref)) < 1e-7


def test_eigenpairs_2d_against_dense(base_2d):
    g = base_2d.grid
    idx = g.flat_index(np.array([[i, j] for i in range(3, 7) for j in range(2, 8)]))
    op = restrict(base_2d, mask_from_indices(g, idx))
    spec = eigenpairs(op, 3)
    w = eigh(op.matrix() / g.cell_volume, eigvals_only=True)
    assert np.allclose(spec.eigenvalues, w[:3], rtol=1e-9)


def test_first_eigenfunction_nonnegative(base_64):
    mask = mask_from_indices(base_64.grid, range(10, 40))
    spec = eigenpairs(restrict(base_64, mask), 2)
    assert spec.eigenfunctions[0].values.min() >= -1e-10


def test_eigenfunctions_orthonormal(base_64):
    mask = mask_from_indices(base_64.grid, range(8, 56))
    spec = eigenpairs(restrict(base_64, mask), 4)
    meas = base_64.grid.cell_volume
    vecs = np.column_stack([f.values for f in spec.eigenfunctions])
    gram = meas * vecs.T @ vecs
    assert np.abs(gram - np.eye(4)).max() < 1e-8


def test_eigenpairs_k_out_of_range(base_64):
    op = restrict(base_64, mask_from_indices(base_64.grid, [1, 2]))
    with pytest.raises(ParameterError):
        eigenpairs(op, 3)
    with pytest.raises(ParameterError):
        eigenpairs(op, 0)


def test_eigenvalues_or_inf_conventions(base_64):
    lam = eigenvalues_or_inf(base_64, empty_mask(base_64.grid), 2)
    assert np.all(np.isinf(lam))
    lam = eigenvalues_or_inf(base_64, mask_from_indices(base_64.grid, [5]), 3)
    assert np.isfinite(lam[0]) and np.isinf(lam[1]) and np.isinf(lam[2])


def test_torsion_against_direct_solve(base_64):
    mask = mask_from_indices(base_64.grid, range(16, 48))
    op = restrict(base_64, mask)
    tor = solve_torsion(op)
    direct = np.linalg.solve(op.matrix(),
                             np.full(op.n_active, base_64.grid.cell_volume))
    assert np.abs(tor.values.values[op.active_index] - direct).max() < 1e-10
    assert np.all(tor.values.values[~mask.cells] == 0.0)


def test_torsion_maximum_principle(base_64):
    rng = np.random.default_rng(11)
    for _ in range(10):
        mask = mask_from_indices(
            base_64.grid, rng.choice(64, rng.integers(3, 30), replace=False))
        tor = solve_torsion(restrict(base_64, mask))
        assert tor.values.values.min() >= -1e-12


def test_torsion_domain_monotonicity(base_64):
    inner = mask_from_indices(base_64.grid, range(24, 40))
    outer = mask_from_indices(base_64.grid, range(16, 48))
    w_in = solve_torsion(restrict(base_64, inner)).values.values
    w_out = solve_torsion(restrict(base_64, outer)).values.values
    assert np.all(w_in <= w_out + 1e-10)


def test_apply_resolvent_against_direct(base_64):
    g = base_64.grid
    mask = mask_from_indices(g, range(20, 44))
    op = restrict(base_64, mask)
    f = GridFunction(g, np.cos(g.cell_centers[:, 0]))
    u = apply_resolvent(op, f)
    direct = np.linalg.solve(op.matrix(),
                             g.cell_volume * f.values[op.active_index])
    assert np.abs(u.values[op.active_index] - direct).max() < 1e-10


def test_resolvent_norm_diff_vs_empty(base_64):
    mask = mask_from_indices(base_64.grid, range(20, 44))
    op = restrict(base_64, mask)
    lam1 = eigenpairs(op, 1).eigenvalues[0]
    assert resolvent_norm_diff(op, None) == pytest.approx(1.0 / lam1, rel=1e-7)
    assert resolvent_norm_diff(None, None) == 0.0
    assert resolvent_norm_diff(op, op) == 0.0


def test_resolvent_norm_diff_dense_oracle(base_64):
    g = base_64.grid
    op_a = restrict(base_64, mask_from_indices(g, range(10, 40)))
    op_b = restrict(base_64, mask_from_indices(g, range(25, 50)))
    meas = g.cell_volume
    ra = np.zeros((64, 64))
    ra[np.ix_(range(10, 40), range(10, 40))] = meas * np.linalg.inv(op_a.matrix())
    rb = np.zeros((64, 64))
    rb[np.ix_(range(25, 50), range(25, 50))] = meas * np.linalg.inv(op_b.matrix())
    expected = np.abs(eigh(ra - rb, eigvals_only=True)).max()
    assert resolvent_norm_diff(op_a, op_b) == pytest.approx(expected, rel=1e-7)


def test_bound_check_duality_and_nesting(base_64):
    g = base_64.grid
    outer = restrict(base_64, mask_from_indices(g, range(12, 52)))
    inner = restrict(base_64, mask_from_indices(g, range(12, 51)))
    rep = torsion_resolvent_bound_check(outer, inner)
    assert rep.duality_residual <= 1e-8
    assert rep.lhs >= 0 and rep.rhs >= 0
    with pytest.raises(StructuralError):
        torsion_resolvent_bound_check(inner, outer)


def test_shrinking_family_co_trend(base_64):
    g = base_64.grid
    outer = restrict(base_64, mask_from_indices(g, range(12, 52)))
    pairs = []
    for drop in (16, 8, 4, 2):
        inner = restrict(base_64, mask_from_indices(g, range(12, 52 - drop)))
        rep = torsion_resolvent_bound_check(outer, inner)
        pairs.append((rep.lhs, rep.rhs))
    lhs = [p[0] for p in pairs]
    rhs = [p[1] for p in pairs]
    assert all(b < a for a, b in zip(lhs, lhs[1:]))
    assert all(b < a for a, b in zip(rhs, rhs[1:]))
    alpha = alpha_exponent_fit(pairs)
    assert np.isfinite(alpha) and alpha > 0


def test_poincare_constant(base_64):
    g = base_64.grid
    mask = mask_from_indices(g, range(20, 44))
    op = restrict(base_64, mask)
    c = poincare_constant(op)
    lam1 = eigenpairs(op, 1).eigenvalues[0]
    assert c == pytest.approx(lam1 ** -0.5, rel=1e-12)
    # shrinking masks give smaller constants
    c_small = poincare_constant(restrict(base_64, mask_from_indices(g, range(25, 39))))
    assert c_small < c


def test_capacity_conventions(base_64):
    g = base_64.grid
    assert capacity_estimate(base_64, empty_mask(g)) == 0.0
    assert capacity_estimate(base_64, full_mask(g)) == pytest.approx(
        base_64.tail.sum(), rel=1e-12)
    with pytest.raises(ParameterError):
        capacity_estimate(base_64, mask_from_indices(g, [0, 1]))


def test_capacity_monotonicity(base_64):
    g = base_64.grid
    small = capacity_estimate(base_64, mask_from_indices(g, range(28, 36)))
    large = capacity_estimate(base_64, mask_from_indices(g, range(24, 40)))
    assert 0 < small <= large


def test_capacity_upper_bounds_indicator_energy(base_64):
    from fracshape.forms import gagliardo_sq

    g = base_64.grid
    mask = mask_from_indices(g, range(28, 36))
    cap = capacity_estimate(base_64, mask)
    indicator = GridFunction(g, mask.cells.astype(float))
    assert cap <= gagliardo_sq(base_64, indicator) + 1e-12
