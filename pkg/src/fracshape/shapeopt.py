"""Spectral shape functionals and volume-constrained minimization.

Functionals are monotone expressions over the first k Dirichlet eigenvalues.
The minimizer is a simulated-annealing exchange walk over equal-volume cell
masks; detectors classify the resulting trajectories as compactness-like or
dichotomy-like and audit volume semicontinuity of the torsion limit.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DomainEmptyError, ParameterError, StructuralError
from .forms import StiffnessOperator, assemble_stiffness
from .grid import DomainMask, Grid, GridFunction, l2_distance, mask_from_indices
from .solvers import (DirichletOperator, TorsionFunction, eigenpairs,
                      resolvent_norm_diff, restrict, solve_torsion)

DEBRIS_FRACTION = 0.02          # volume share tolerated outside the two clusters
RESOLVENT_GAP_FRACTION = 0.05   # debris-removal gap allowed for a dichotomy verdict
CAUCHY_FRACTION = 0.02          # relative torsion spread for a compactness verdict


# --- functional grammar -------------------------------------------------------

@dataclass(frozen=True)
class FunctionalSpec:
    """Monotone eigenvalue functional: expression over l1..lk built from
    +, max, nonnegative constants, and multiplication by positive constants."""

    k: int
    combiner: str
    name: str
    _tree: ast.Expression = field(repr=False, compare=False)


def _is_constant(node) -> bool:
    return isinstance(node, ast.Constant) and isinstance(node.value, (int, float))


def _validate_node(node, k: int) -> None:
    if _is_constant(node):
        return
    if isinstance(node, ast.Name):
        if node.id.startswith("l") and node.id[1:].isdigit():
            j = int(node.id[1:])
            if 1 <= j <= k:
                return
        raise ParameterError(f"unknown name {node.id!r}; variables are l1..l{k}")
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Add):
        _validate_node(node.left, k)
        _validate_node(node.right, k)
        return
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
        const = node.left if _is_constant(node.left) else node.right
        other = node.right if _is_constant(node.left) else node.left
        if not _is_constant(const) or const.value <= 0:
            raise ParameterError("multiplication must involve a positive constant")
        _validate_node(other, k)
        return
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id == "max" and not node.keywords and len(node.args) >= 1):
        for a in node.args:
            _validate_node(a, k)
        return
    raise ParameterError(
        "combiner may only use l1..lk, constants, +, max, and positive scaling"
    )


def make_functional(name: str, k: int, combiner: str) -> FunctionalSpec:
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ParameterError(f"k must be an integer >= 1, got {k}")
    try:
        tree = ast.parse(combiner, mode="eval")
    except SyntaxError as exc:
        raise ParameterError(f"combiner does not parse: {exc}") from exc
    _validate_node(tree.body, int(k))
    return FunctionalSpec(k=int(k), combiner=combiner, name=name, _tree=tree)


def _eval_node(node, lam: np.ndarray) -> float:
    if _is_constant(node):
        return float(node.value)
    if isinstance(node, ast.Name):
        return float(lam[int(node.id[1:]) - 1])
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Add):
        return _eval_node(node.left, lam) + _eval_node(node.right, lam)
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
        return _eval_node(node.left, lam) * _eval_node(node.right, lam)
    return max(_eval_node(a, lam) for a in node.args)


def eval_functional(spec: FunctionalSpec, base: StiffnessOperator,
                    mask: DomainMask) -> float:
    """J(mask) = combiner(lambda_1..lambda_k); +inf on the empty mask."""
    if mask.is_empty:
        return float("inf")
    op = restrict(base, mask)
    kk = min(spec.k, op.n_active)
    lam = eigenpairs(op, kk).eigenvalues
    if kk < spec.k:
        lam = np.concatenate([lam, np.full(spec.k - kk, np.inf)])
    return float(_eval_node(spec._tree.body, lam))


# --- geometry helpers ---------------------------------------------------------

def gamma_distance(op_a: DirichletOperator | None,
                   op_b: DirichletOperator | None) -> float:
    """L2 distance of the torsion functions (empty domains use w = 0)."""
    ops = [op for op in (op_a, op_b) if op is not None]
    if not ops:
        return 0.0
    grid = ops[0].grid
    if any(op.grid != grid for op in ops):
        raise StructuralError("operators live on different grids")
    zero = GridFunction(grid, np.zeros(grid.n_cells))
    w_a = solve_torsion(op_a).values if op_a is not None else zero
    w_b = solve_torsion(op_b).values if op_b is not None else zero
    return l2_distance(w_a, w_b)


def ball_mask(grid: Grid, center, volume: float) -> DomainMask:
    """Mask of the round(volume / h^dim) cells nearest to center.

    Distance ties are broken by cell index, so the construction is
    deterministic.
    """
    count = int(round(volume / grid.cell_volume))
    if not (1 <= count <= grid.n_cells):
        raise ParameterError(
            f"volume {volume} needs {count} cells, grid has {grid.n_cells}"
        )
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape != (grid.dim,):
        raise ParameterError(f"center must have {grid.dim} components")
    dist = np.sqrt(((grid.cell_centers - center) ** 2).sum(axis=1))
    order = np.lexsort((np.arange(grid.n_cells), dist))
    return mask_from_indices(grid, order[:count])


def two_ball_experiment(grid: Grid, s: float, total_volume: float,
                        distances) -> list:
    """Second eigenvalue of two receding equal balls against one ball.

    d is the mutual distance between the two balls (between the sets, not
    the centers).  The comparison ball of the same half volume is centered
    on one of the pair so that its exterior-tail environment matches.
    Each row reports d, lambda1 and lambda2 of the union, lambda1 of the
    half ball, and gap = lambda2(union) - lambda1(half ball).
    """
    base = assemble_stiffness(grid, s)
    half = total_volume / 2.0
    count = int(round(half / grid.cell_volume))
    # 1D balls are intervals of length count*h; 2D radius from the disc area
    if grid.dim == 1:
        radius = 0.5 * count * grid.h
    else:
        radius = np.sqrt(half / np.pi)
    rows = []
    for d in distances:
        d = float(d)
        if d <= 0:
            raise ParameterError(
                f"distance {d} overlaps the balls; it must be > 0"
            )
        if d / 2.0 + 2.0 * radius > grid.half_width:
            raise ParameterError(
                f"distance {d} pushes a ball outside the box of half width "
                f"{grid.half_width}"
            )
        center = np.zeros(grid.dim)
        offset = np.zeros(grid.dim)
        offset[0] = d / 2.0 + radius
        left = ball_mask(grid, center - offset, half)
        right = ball_mask(grid, center + offset, half)
        union = DomainMask(grid, left.cells | right.cells)
        lam = eigenpairs(restrict(base, union), 2).eigenvalues
        lam_half = eigenpairs(restrict(base, right), 1).eigenvalues[0]
        rows.append({"d": d, "lambda1_union": float(lam[0]),
                     "lambda2_union": float(lam[1]),
                     "lambda1_half_ball": float(lam_half),
                     "gap": float(lam[1] - lam_half)})
    return rows


# --- simulated annealing ------------------------------------------------------

@dataclass(frozen=True)
class AnnealingSchedule:
    """T_j = t0_factor * |J_initial| * decay^j."""

    t0_factor: float = 0.1
    decay: float = 0.995


@dataclass(frozen=True)
class ShapeTrajectory:
    """Improvement snapshots of a volume-constrained minimization walk.

    masks/values/torsions record the incumbent-best sequence (values are
    nonincreasing by construction); move_log records every accepted move,
    including uphill annealing moves.
    """

    masks: list
    values: list
    torsions: list
    seed: int
    move_log: list


def _neighbor_offsets(dim: int) -> list:
    if dim == 1:
        return [(-1,), (1,)]
    return [(-1, 0), (1, 0), (0, -1), (0, 1)]


def _boundary_cells(grid: Grid, cells: np.ndarray) -> np.ndarray:
    """Active cells with at least one inactive face neighbor (box exterior
    counts as inactive)."""
    shape = (grid.resolution,) * grid.dim
    arr = cells.reshape(shape)
    interior = np.ones(shape, dtype=bool)
    for off in _neighbor_offsets(grid.dim):
        shifted = np.ones(shape, dtype=bool) & False
        src = tuple(slice(max(0, -o), grid.resolution - max(0, o)) for o in off)
        dst = tuple(slice(max(0, o), grid.resolution + min(0, o)) for o in off)
        shifted[dst] = arr[src]
        interior &= shifted
    return np.flatnonzero(arr & ~interior)


def minimize_shape(spec: FunctionalSpec, base: StiffnessOperator, c: float,
                   iterations: int, seed: int,
                   schedule: AnnealingSchedule | None = None) -> ShapeTrajectory:
    """Volume-preserving annealing walk minimizing J over c-volume masks.

    Each move removes one boundary cell and inserts one currently inactive
    cell; downhill moves are always accepted, uphill moves with probability
    exp(-dJ / T_j).  Deterministic for a given seed.
    """
    grid = base.grid
    m = int(round(c / grid.cell_volume))
    if abs(c - m * grid.cell_volume) > 1e-9 * grid.cell_volume or m < 2:
        raise ParameterError(
            f"volume must be an integer multiple (>= 2) of the cell volume, got {c}"
        )
    if m > grid.n_cells:
        raise ParameterError(f"volume {c} exceeds the box capacity")
    if iterations < 0:
        raise ParameterError(f"iterations must be >= 0, got {iterations}")
    schedule = schedule or AnnealingSchedule()
    rng = np.random.default_rng(seed)
    cells = np.zeros(grid.n_cells, dtype=bool)
    cells[rng.choice(grid.n_cells, m, replace=False)] = True
    value = eval_functional(spec, base, DomainMask(grid, cells))
    t0 = schedule.t0_factor * abs(value) if np.isfinite(value) else 1.0
    masks = [DomainMask(grid, cells.copy())]
    values = [value]
    move_log = []
    best = value
    for j in range(int(iterations)):
        boundary = _boundary_cells(grid, cells)
        if boundary.size == 0:
            break
        out_cell = int(rng.choice(boundary))
        inactive = np.flatnonzero(~cells)
        in_cell = int(rng.choice(inactive))
        cells[out_cell] = False
        cells[in_cell] = True
        new_value = eval_functional(spec, base, DomainMask(grid, cells))
        delta = new_value - value
        temp = t0 * schedule.decay ** j
        accept = delta < 0 or (temp > 0 and np.isfinite(delta)
                               and rng.random() < np.exp(-delta / temp))
        if accept:
            value = new_value
            move_log.append({"iteration": j, "removed": out_cell,
                             "inserted": in_cell, "value": value})
            if value < best:
                best = value
                masks.append(DomainMask(grid, cells.copy()))
                values.append(value)
        else:
            cells[out_cell] = True
            cells[in_cell] = False
    torsions = [solve_torsion(restrict(base, mk)) for mk in masks]
    return ShapeTrajectory(masks=masks, values=values, torsions=torsions,
                           seed=seed, move_log=move_log)


def trajectory_from_masks(base: StiffnessOperator, masks,
                          spec: FunctionalSpec | None = None,
                          seed: int = 0) -> ShapeTrajectory:
    """Wrap an explicit mask sequence as a trajectory (for the detectors)."""
    masks = list(masks)
    if not masks:
        raise ParameterError("trajectory needs at least one mask")
    values = [eval_functional(spec, base, mk) if spec is not None else float("nan")
              for mk in masks]
    torsions = [solve_torsion(restrict(base, mk)) for mk in masks]
    return ShapeTrajectory(masks=masks, values=values, torsions=torsions,
                           seed=seed, move_log=[])


# --- trajectory detectors -----------------------------------------------------

@dataclass(frozen=True)
class DichotomyReport:
    verdict: str                 # compactness | dichotomy | inconclusive
    components: list | None      # per tail mask: (cluster1 mask, cluster2 mask)
    separations: list
    component_volumes: list
    resolvent_gap: list


def connected_components(mask: DomainMask) -> list:
    """Face-adjacent lattice components as index arrays, largest first."""
    grid = mask.grid
    shape = (grid.resolution,) * grid.dim
    structure = ndimage.generate_binary_structure(grid.dim, 1)
    labels, n = ndimage.label(mask.cells.reshape(shape), structure=structure)
    flat = labels.ravel()
    comps = [np.flatnonzero(flat == i) for i in range(1, n + 1)]
    return sorted(comps, key=lambda idx: (-idx.size, idx[0]))


def _component_gap(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    ca, cb = grid.cell_centers[a], grid.cell_centers[b]
    return float(min(np.sqrt(((cb - p) ** 2).sum(axis=1)).min() for p in ca))


def _two_clusters(grid: Grid, comps: list):
    """Single-linkage agglomeration of components down to two clusters."""
    clusters = [list(c) for c in comps]
    while len(clusters) > 2:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                g = _component_gap(grid, np.asarray(clusters[i]),
                                   np.asarray(clusters[j]))
                if best is None or g < best[0]:
                    best = (g, i, j)
        _, i, j = best
        clusters[i] = clusters[i] + clusters[j]
        del clusters[j]
    return [np.asarray(sorted(c)) for c in clusters]


def _analyze_mask(base: StiffnessOperator, mask: DomainMask):
    """Split a mask into two clusters, dropping small debris components.

    Returns (cluster index arrays, separation, volumes, resolvent gap to the
    debris-free union) or None when the mask is effectively one cluster.
    """
    grid = mask.grid
    comps = connected_components(mask)
    debris_cells = int(DEBRIS_FRACTION * mask.n_active)
    main = [c for c in comps if c.size > debris_cells]
    dropped = mask.n_active - sum(c.size for c in main)
    if dropped > debris_cells or len(main) == 0:
        return None
    if len(main) == 1:
        return ("single", main[0], dropped)
    clusters = _two_clusters(grid, main)
    sep = _component_gap(grid, clusters[0], clusters[1])
    vols = (grid.cell_volume * clusters[0].size, grid.cell_volume * clusters[1].size)
    if dropped > 0:
        kept = mask_from_indices(grid, np.concatenate(clusters))
        gap = resolvent_norm_diff(restrict(base, mask), restrict(base, kept))
    else:
        gap = 0.0
    return ("pair", clusters, sep, vols, gap)


def _recentered_torsion(t: TorsionFunction) -> GridFunction:
    """Shift the torsion by whole cells so its mass centroid sits at the
    box center (values rolled on the lattice, zero-filled)."""
    grid = t.mask.grid
    w = t.values.values
    shape = (grid.resolution,) * grid.dim
    arr = w.reshape(shape)
    total = w.sum()
    if total <= 0:
        return t.values
    out = arr
    for axis in range(grid.dim):
        coords = np.arange(grid.resolution)
        profile = out.sum(axis=tuple(a for a in range(grid.dim) if a != axis))
        centroid = (coords * profile).sum() / profile.sum()
        shift = int(round((grid.resolution - 1) / 2.0 - centroid))
        rolled = np.roll(out, shift, axis=axis)
        if shift > 0:
            rolled[(slice(None),) * axis + (slice(0, shift),)] = 0.0
        elif shift < 0:
            rolled[(slice(None),) * axis + (slice(shift, None),)] = 0.0
        out = rolled
    return GridFunction(grid, out.ravel())


def detect_dichotomy(traj: ShapeTrajectory, base: StiffnessOperator) -> DichotomyReport:
    """Classify a trajectory tail as dichotomy-like or compactness-like.

    Dichotomy needs two clusters with strictly increasing separation,
    cluster volumes bounded away from zero, and a small resolvent gap to
    the debris-free union.  Compactness needs the recentered torsion
    functions to be Cauchy in L2.
    """
    if not traj.masks:
        raise ParameterError("trajectory is empty")
    n = len(traj.masks)
    tail_idx = list(range(max(0, n - max(2, n // 3)), n))
    analyses = [_analyze_mask(base, traj.masks[i]) for i in tail_idx]
    separations, volumes, gaps, components = [], [], [], []
    all_pairs = all(a is not None and a[0] == "pair" for a in analyses)
    if all_pairs:
        for a, i in zip(analyses, tail_idx):
            _, clusters, sep, vols, gap = a
            grid = traj.masks[i].grid
            components.append((mask_from_indices(grid, clusters[0]),
                               mask_from_indices(grid, clusters[1])))
            separations.append(sep)
            volumes.append(vols)
            gaps.append(gap)
        increasing = all(b > a for a, b in zip(separations, separations[1:]))
        floor = min(min(v) for v in volumes) > 0
        norms = [1.0 / eigenpairs(restrict(base, traj.masks[i]), 1).eigenvalues[0]
                 for i in tail_idx]
        small_gap = all(g <= RESOLVENT_GAP_FRACTION * nm
                        for g, nm in zip(gaps, norms))
        if increasing and floor and small_gap:
            return DichotomyReport("dichotomy", components, separations,
                                   volumes, gaps)
    recentered = [_recentered_torsion(traj.torsions[i]) for i in tail_idx]
    scale = np.mean([w.l2_norm() for w in recentered])
    cauchy = all(
        l2_distance(recentered[i], recentered[j]) < CAUCHY_FRACTION * scale
        for i in range(len(recentered)) for j in range(i + 1, len(recentered))
    ) if scale > 0 else False
    if cauchy:
        return DichotomyReport("compactness", None, separations, volumes, gaps)
    return DichotomyReport("inconclusive", components or None, separations,
                           volumes, gaps)


@dataclass(frozen=True)
class VolumeSemicontinuityReport:
    limit_volume: float
    min_tail_volume: float
    passed: bool


def volume_semicontinuity_check(traj: ShapeTrajectory,
                                gamma_tolerance: float | None = None
                                ) -> VolumeSemicontinuityReport:
    """Volume of the torsion-limit support against the tail volumes.

    The limit set is the positivity set {w > 1e-8 max w} of the last
    torsion; its volume must not exceed the smallest tail volume (up to one
    cell).  Requires a gamma-convergent tail: pairwise torsion distances
    below the tolerance (default 2% of the mean torsion norm).
    """
    if not traj.masks:
        raise ParameterError("trajectory is empty")
    n = len(traj.masks)
    tail_idx = list(range(max(0, n - max(2, n // 3)), n))
    tails = [traj.torsions[i].values for i in tail_idx]
    scale = np.mean([w.l2_norm() for w in tails])
    tol = gamma_tolerance if gamma_tolerance is not None else CAUCHY_FRACTION * scale
    for i in range(len(tails)):
        for j in range(i + 1, len(tails)):
            if l2_distance(tails[i], tails[j]) >= tol:
                raise ParameterError(
                    "trajectory tail is not gamma-convergent within tolerance"
                )
    w = tails[-1]
    grid = w.grid
    threshold = 1e-8 * w.values.max()
    limit_volume = grid.cell_volume * int(np.count_nonzero(w.values > threshold))
    min_tail = min(traj.masks[i].volume for i in tail_idx)
    return VolumeSemicontinuityReport(
        limit_volume=float(limit_volume),
        min_tail_volume=float(min_tail),
        passed=limit_volume <= min_tail + grid.cell_volume + 1e-12,
    )
