"""Nonlinear Gauss-Seidel minimization of the discrete J with Dirichlet data.

Every free node minimizes its one-node energy

    e(v) = h^(dim-2) * sum_j (v - u_j)^2 + h^dim * W(v)

over v >= 0. Up to the factor h^(dim-2) and a constant this is ``deg * v^2 - 2 * v * S + h^2 * c_gamma * v^(-gamma)``
for v > 0 and 0 for v = 0, where S is the neighbour sum. The positive minimizer is the unique root of a convex
increasing scalar equation, which is compared against the dead value 0 exactly.
"""

import logging
import sys
import warnings
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import attr
import numpy as np
from attr import validators
from scipy import interpolate, optimize, sparse
from scipy.sparse import linalg as sparse_linalg

from altphillips.energy import eval_J
from altphillips.field import FieldError, Grid, IndicatorField, ScalarField, distance_transform
from altphillips.potential import PotentialParams
from altphillips.profile import exact_phi
from altphillips.util import is_nonincreasing

logger = logging.getLogger(__name__)

#: Relative slack of the monotone descent check, for rounding in the energy sums
DESCENT_RTOL = 1e-12

_NEWTON_ITERATIONS = 100

_BRACKET_DOUBLINGS = 60


class Ordering(Enum):
    LEXICOGRAPHIC = "lexicographic"
    RED_BLACK = "red-black"


class SeedProfile(Enum):
    FLAT = "flat"
    DISTANCE_PROFILE = "distance-profile"


@attr.s(auto_exc=True)
class SolverError(ArithmeticError):
    """Raised when a solve cannot proceed, e.g. on non-finite data or when a root cannot be bracketed."""

    #: str: What went wrong
    description: str = attr.ib()

    #: Optional[Tuple[int, ...]]: The node at which it went wrong, if any
    node: Optional[Tuple[int, ...]] = attr.ib(default=None)

    def __str__(self) -> str:
        if self.node is None:
            return self.description
        return f"{self.description} at node {self.node}"


def _validate_schedule(instance, attribute, value):
    if len(value) == 0 or value[-1] != 0.0:
        raise ValueError(f"delta_schedule must end with 0, was {value}")
    if any(b >= a for a, b in zip(value, value[1:])):
        raise ValueError(f"delta_schedule must be strictly decreasing, was {value}")
    if value[0] < 0:
        raise ValueError(f"delta_schedule must be nonnegative, was {value}")


@attr.s(slots=True, frozen=True)
class SolverOptions:
    """Knobs of :func:`minimize_J`."""

    #: int: Sweep budget per continuation stage
    max_sweeps: int = attr.ib(default=2000, converter=int, validator=validators.instance_of(int))

    #: float: A stage ends once the relative energy decrease of a sweep drops below this
    energy_tol: float = attr.ib(default=1e-10, converter=float)

    #: Tuple[float, ...]: Floors for positive values in units of phi(h), strictly decreasing, ending with 0
    delta_schedule: Tuple[float, ...] = attr.ib(
        default=(1e-2, 1e-3, 1e-4, 0.0), converter=lambda v: tuple(float(x) for x in v), validator=_validate_schedule
    )

    #: Ordering: Node order within a sweep
    ordering: Ordering = attr.ib(default=Ordering.LEXICOGRAPHIC, converter=Ordering)

    #: SeedProfile: Initial guess
    seed_profile: SeedProfile = attr.ib(default=SeedProfile.DISTANCE_PROFILE, converter=SeedProfile)

    #: int: Number of coarser grids solved first, each one seeding the next finer one
    nested_levels: int = attr.ib(default=0, converter=int)

    @max_sweeps.validator
    def _check_max_sweeps(self, attribute, value):
        if value < 1:
            raise ValueError(f"max_sweeps must be positive, was [{value}]")

    @nested_levels.validator
    def _check_nested_levels(self, attribute, value):
        if value < 0:
            raise ValueError(f"nested_levels must be nonnegative, was [{value}]")

    def to_dict(self) -> dict:
        result = attr.asdict(self)
        result["delta_schedule"] = list(self.delta_schedule)
        result["ordering"] = self.ordering.value
        result["seed_profile"] = self.seed_profile.value
        return result

    @classmethod
    def from_dict(cls, values: dict) -> "SolverOptions":
        return cls(**values)


@attr.s(slots=True, frozen=True)
class SolveReport:
    """Outcome of :func:`minimize_J`."""

    #: List[float]: Total energy after seeding and after every sweep
    energy_trace: List[float] = attr.ib(converter=list)

    #: int: Number of sweeps performed over all stages
    sweeps_used: int = attr.ib()

    #: float: Fraction of free nodes that are exactly zero
    dead_fraction: float = attr.ib()

    #: bool: Whether the final stage met the energy tolerance
    converged: bool = attr.ib()

    #: List[int]: Trace indices at which a continuation stage starts
    stage_starts: List[int] = attr.ib(factory=list, converter=list)

    @energy_trace.validator
    def _check_trace(self, attribute, value):
        if not is_nonincreasing(value, rel_tol=DESCENT_RTOL):
            raise ValueError("Energy trace must be nonincreasing")

    @dead_fraction.validator
    def _check_dead_fraction(self, attribute, value):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"dead_fraction must lie in [0, 1], was [{value}]")

    def to_dict(self) -> dict:
        return attr.asdict(self)


# Local problem


def _local_delta(v: float, s: float, deg: int, hc: float, gamma: float) -> float:
    if v == 0.0:
        return 0.0
    return v * (deg * v - 2.0 * s) + hc * v ** (-gamma)


def _stationary_root(s: float, deg: int, k: float, gamma: float, node: Tuple[int, ...]) -> float:
    """Positive root of ``2 v^(gamma+1) (deg v - S) = k`` in the variable ``v = (S / deg) (1 + x)``."""
    lo = s / deg
    a = 2.0 * s * lo ** (gamma + 1.0)

    def f(x: float) -> float:
        return a * (1.0 + x) ** (gamma + 1.0) * x - k

    x_hi = min((k / (2.0 * deg)) ** (1.0 / (gamma + 2.0)) / lo, k / a)
    for _ in range(_BRACKET_DOUBLINGS):
        if f(x_hi) >= 0:
            break
        x_hi *= 2.0
    else:
        raise SolverError("Cannot bracket the stationary root", node)

    if x_hi == 0.0:
        return lo
    x = optimize.brentq(f, 0.0, x_hi, xtol=1e-300, rtol=4 * sys.float_info.epsilon)
    return lo * (1.0 + x)


def _best_value(
    current: float, s: float, deg: int, k: float, hc: float, gamma: float, floor: float, node: Tuple[int, ...]
) -> float:
    if s <= 0.0:
        return 0.0

    best = max(_stationary_root(s, deg, k, gamma, node), floor)
    best_delta = _local_delta(best, s, deg, hc, gamma)
    if current > 0.0:
        current_delta = _local_delta(current, s, deg, hc, gamma)
        if current_delta <= best_delta:
            best, best_delta = current, current_delta

    # Ties go to the dead value
    return best if best_delta < 0.0 else 0.0


def _stationary_roots(s: np.ndarray, deg: np.ndarray, k: float, gamma: float) -> np.ndarray:
    """Vectorized :func:`_stationary_root` by Newton's method from above, for strictly positive `s`."""
    lo = s / deg
    a = 2.0 * s * lo ** (gamma + 1.0)
    x = np.minimum((k / (2.0 * deg)) ** (1.0 / (gamma + 2.0)) / lo, k / a)
    for _ in range(_NEWTON_ITERATIONS):
        f = a * (1.0 + x) ** (gamma + 1.0) * x - k
        df = a * ((1.0 + x) ** (gamma + 1.0) + (gamma + 1.0) * (1.0 + x) ** gamma * x)
        step = f / df
        x = np.maximum(x - step, 0.0)
        if np.all(np.abs(step) <= 4 * np.finfo(float).eps * np.maximum(x, 1e-300)):
            break
    return lo * (1.0 + x)


def _best_values(
    current: np.ndarray, s: np.ndarray, deg: np.ndarray, k: float, hc: float, gamma: float, floor: float
) -> np.ndarray:
    result = np.zeros_like(current)
    alive = s > 0.0
    if not alive.any():
        return result

    s, deg, current = s[alive], deg[alive], current[alive]
    candidate = np.maximum(_stationary_roots(s, deg, k, gamma), floor)
    candidate_delta = candidate * (deg * candidate - 2.0 * s) + hc * candidate ** (-gamma)

    positive = current > 0.0
    safe_current = np.where(positive, current, 1.0)
    current_delta = np.where(
        positive, safe_current * (deg * safe_current - 2.0 * s) + hc * safe_current ** (-gamma), np.inf
    )
    keep = current_delta <= candidate_delta
    best = np.where(keep, current, candidate)
    best_delta = np.where(keep, current_delta, candidate_delta)
    result[alive] = np.where(best_delta < 0.0, best, 0.0)
    return result


# Grid bookkeeping


def _neighbour_sums(grid: Grid, values: np.ndarray) -> np.ndarray:
    sums = np.zeros_like(values)
    for axis in range(grid.dim):
        lower = [slice(None)] * grid.dim
        upper = [slice(None)] * grid.dim
        lower[axis] = slice(None, -1)
        upper[axis] = slice(1, None)
        sums[tuple(lower)] += values[tuple(upper)]
        sums[tuple(upper)] += values[tuple(lower)]
    return sums


def _degrees(grid: Grid) -> np.ndarray:
    return _neighbour_sums(grid, np.ones(grid.shape)).astype(int)


def _neighbour_lists(grid: Grid, free: np.ndarray) -> Tuple[List[int], List[Tuple[int, ...]], List[List[int]]]:
    """Flat indices of the free nodes in lexicographic order, their grid indices and the flat indices of their
    neighbours."""
    nodes, indices, neighbours = [], [], []
    shape = grid.shape
    for index in zip(*np.nonzero(free)):
        index = tuple(int(i) for i in index)
        adjacent = []
        for axis in range(grid.dim):
            for offset in (-1, 1):
                other = list(index)
                other[axis] += offset
                if 0 <= other[axis] < shape[axis]:
                    adjacent.append(int(np.ravel_multi_index(other, shape)))
        nodes.append(int(np.ravel_multi_index(index, shape)))
        indices.append(index)
        neighbours.append(adjacent)
    return nodes, indices, neighbours


def _colors(grid: Grid, free: np.ndarray) -> List[np.ndarray]:
    parity = sum(np.indices(grid.shape)) % 2
    return [free & (parity == 0), free & (parity == 1)]


# Seeds


def harmonic_extension(grid: Grid, boundary: ScalarField) -> ScalarField:
    """Solves the discrete Laplace equation with the Dirichlet data of `boundary`.

    This is the ``flat`` seed of the solver.
    """
    fixed = boundary.boundary_mask
    free = ~fixed
    values = np.where(fixed, boundary.values, 0.0)
    if not free.any():
        return boundary.with_values(values)

    numbering = -np.ones(grid.shape, dtype=int)
    numbering[free] = np.arange(np.count_nonzero(free))
    rows, cols, entries = [], [], []
    rhs = np.zeros(np.count_nonzero(free))

    degrees = _degrees(grid)
    rows.append(numbering[free])
    cols.append(numbering[free])
    entries.append(degrees[free].astype(float))

    for axis in range(grid.dim):
        for offset in (-1, 1):
            source = [slice(None)] * grid.dim
            target = [slice(None)] * grid.dim
            source[axis] = slice(max(0, -offset), grid.shape[axis] - max(0, offset))
            target[axis] = slice(max(0, offset), grid.shape[axis] - max(0, -offset))
            source, target = tuple(source), tuple(target)

            node_free = free[source]
            other_free = free[target]
            both = node_free & other_free
            rows.append(numbering[source][both])
            cols.append(numbering[target][both])
            entries.append(-np.ones(np.count_nonzero(both)))

            to_data = node_free & ~other_free
            np.add.at(rhs, numbering[source][to_data], values[target][to_data])

    n = len(rhs)
    matrix = sparse.csr_matrix((np.concatenate(entries), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    solution = sparse_linalg.spsolve(matrix, rhs)
    values[free] = np.maximum(solution, 0.0)
    return boundary.with_values(values)


def _distance_profile_seed(grid: Grid, p: PotentialParams, boundary: ScalarField) -> np.ndarray:
    zero_data = boundary.boundary_mask & (boundary.values == 0.0)
    if not zero_data.any():
        return harmonic_extension(grid, boundary).values

    dist = distance_transform(IndicatorField(grid, zero_data)).dist
    cap = float(boundary.values[boundary.boundary_mask].max())
    return np.minimum(exact_phi(p, dist), cap)


def _coarse_seed(grid: Grid, p: PotentialParams, boundary: ScalarField, opts: SolverOptions) -> Optional[np.ndarray]:
    if any(n % 2 for n in grid.n_cells) or min(grid.n_cells) < 4:
        logger.info("Grid %s cannot be coarsened, skipping nested iteration", grid.n_cells)
        return None

    coarse_grid = Grid(grid.dim, grid.origin, tuple(n // 2 for n in grid.n_cells), 2.0 * grid.h)
    step = (slice(None, None, 2),) * grid.dim
    coarse_boundary = ScalarField(coarse_grid, boundary.values[step], boundary.boundary_mask[step])
    coarse_u, _ = minimize_J(coarse_grid, p, coarse_boundary, attr.evolve(opts, nested_levels=opts.nested_levels - 1))

    interpolator = interpolate.RegularGridInterpolator(coarse_grid.axes(), coarse_u.values, method="linear")
    return interpolator(grid.coordinates().reshape(-1, grid.dim)).reshape(grid.shape)


# Solver


def _check_boundary(grid: Grid, boundary: ScalarField):
    if boundary.grid != grid:
        raise FieldError("Boundary data lives on a different grid")
    data = boundary.values[boundary.boundary_mask]
    if not np.all(np.isfinite(data)):
        index = tuple(int(i) for i in np.argwhere(boundary.boundary_mask & ~np.isfinite(boundary.values))[0])
        raise SolverError("Boundary data is not finite", index)


def _total_energy(grid: Grid, p: PotentialParams, values: np.ndarray, mask: np.ndarray) -> float:
    return eval_J(ScalarField(grid, values, mask), p).total


def minimize_J(
    grid: Grid, p: PotentialParams, boundary: ScalarField, opts: Optional[SolverOptions] = None
) -> Tuple[ScalarField, SolveReport]:
    """Minimizes the discrete J over nonnegative fields that agree with `boundary` on its Dirichlet nodes.

    Sweeps run through the continuation stages of ``opts.delta_schedule``; during a stage positive values are kept
    above ``delta * phi(h)``. The last stage has no floor. Dead nodes are re-tested in every sweep.

    Args:
        grid: The grid
        p: The potential
        boundary: Dirichlet data on ``boundary.boundary_mask``, the remaining values are ignored
        opts: Solver options, defaults if `None`

    Returns:
        The minimizer, with exact zeros on dead nodes, and the solve report

    Raises:
        SolverError: On non-finite boundary data or if a stationary root cannot be bracketed
    """
    opts = SolverOptions() if opts is None else opts
    _check_boundary(grid, boundary)

    mask = boundary.boundary_mask
    free = ~mask
    h = grid.h
    k = h * h * p.gamma * p.c_gamma
    hc = h * h * p.c_gamma
    scale = exact_phi(p, h)

    seed = None
    if opts.nested_levels > 0:
        seed = _coarse_seed(grid, p, boundary, opts)
    if seed is None:
        if opts.seed_profile is SeedProfile.FLAT:
            seed = harmonic_extension(grid, boundary).values
        else:
            seed = _distance_profile_seed(grid, p, boundary)

    values = np.where(mask, boundary.values, seed)
    first_floor = opts.delta_schedule[0] * scale
    values[free & (values < first_floor)] = 0.0

    degrees = _degrees(grid)
    if opts.ordering is Ordering.LEXICOGRAPHIC:
        nodes, indices, neighbours = _neighbour_lists(grid, free)
    else:
        colors = _colors(grid, free)

    trace = [_total_energy(grid, p, values, mask)]
    stage_starts = []
    sweeps_used = 0
    converged = False

    for delta in opts.delta_schedule:
        floor = delta * scale
        stage_starts.append(len(trace) - 1)
        logger.info("Continuation stage with floor %g, energy %.12g", floor, trace[-1])
        converged = False

        for _ in range(opts.max_sweeps):
            if opts.ordering is Ordering.LEXICOGRAPHIC:
                flat = values.ravel().tolist()
                for node, index, adjacent in zip(nodes, indices, neighbours):
                    s = 0.0
                    for j in adjacent:
                        s += flat[j]
                    flat[node] = _best_value(flat[node], s, len(adjacent), k, hc, p.gamma, floor, index)
                values = np.array(flat).reshape(grid.shape)
            else:
                for color in colors:
                    sums = _neighbour_sums(grid, values)
                    values[color] = _best_values(values[color], sums[color], degrees[color], k, hc, p.gamma, floor)

            sweeps_used += 1
            energy = _total_energy(grid, p, values, mask)
            previous = trace[-1]
            logger.debug("Sweep %d: energy %.15g", sweeps_used, energy)
            if energy > previous + DESCENT_RTOL * abs(previous):
                raise SolverError(f"Energy increased from [{previous}] to [{energy}] in sweep [{sweeps_used}]")
            trace.append(energy)

            if previous - energy <= opts.energy_tol * max(abs(previous), sys.float_info.min):
                converged = True
                break

        if not converged:
            warnings.warn(f"Stage with floor [{floor}] did not meet the energy tolerance in {opts.max_sweeps} sweeps")

    n_free = int(np.count_nonzero(free))
    dead = int(np.count_nonzero(free & (values == 0.0)))
    report = SolveReport(
        energy_trace=trace,
        sweeps_used=sweeps_used,
        dead_fraction=dead / n_free if n_free else 0.0,
        converged=converged,
        stage_starts=stage_starts,
    )
    return ScalarField(grid, values, mask), report


# Post-hoc certificates


def local_optimality_gap(u: ScalarField, p: PotentialParams) -> float:
    """Largest energy decrease achievable by changing a single free node.

    The moves tried are ``v + h^2``, ``v - h^2`` (when nonnegative), ``0`` and the stationary root.
    """
    grid = u.grid
    free = ~u.boundary_mask
    if not free.any():
        return 0.0

    h = grid.h
    hc = h * h * p.c_gamma
    k = hc * p.gamma
    v = u.values[free]
    s = _neighbour_sums(grid, u.values)[free]
    deg = _degrees(grid)[free]

    def delta(w):
        safe = np.where(w > 0, w, 1.0)
        return np.where(w > 0, safe * (deg * safe - 2.0 * s) + hc * safe ** (-p.gamma), 0.0)

    moves = [v + h * h, np.where(v >= h * h, v - h * h, v), np.zeros_like(v)]
    alive = s > 0
    if alive.any():
        root = v.copy()
        root[alive] = _stationary_roots(s[alive], deg[alive], k, p.gamma)
        moves.append(root)

    current = delta(v)
    decrease = max(float(np.max(current - delta(w))) for w in moves)
    return max(decrease, 0.0) * h ** (grid.dim - 2)


def euler_lagrange_residual(u: ScalarField, p: PotentialParams) -> float:
    """Largest ``|2 * Laplace_h u - W'(u)|`` over free positive nodes whose neighbours are all positive."""
    grid = u.grid
    degrees = _degrees(grid)
    positive = u.values > 0
    positive_neighbours = _neighbour_sums(grid, positive.astype(float)).astype(int)
    nodes = ~u.boundary_mask & positive & (positive_neighbours == degrees)
    if not nodes.any():
        return 0.0

    values = u.values[nodes]
    laplacian = (_neighbour_sums(grid, u.values)[nodes] - degrees[nodes] * values) / grid.h ** 2
    w_prime = -p.gamma * p.c_gamma * values ** (-p.gamma - 1.0)
    return float(np.max(np.abs(2.0 * laplacian - w_prime)))


def certify_growth(u: ScalarField, p: PotentialParams, x0: Sequence[int]) -> float:
    """Smallest C with ``u(x) <= C |x - x0|^alpha`` on the ball of half the distance from `x0` to the box boundary.

    Args:
        u: The field
        p: The potential
        x0: Index of a dead node with a positive neighbour

    Returns:
        The growth constant, 0 if u vanishes on the ball

    Raises:
        FieldError: If `x0` is not on the free boundary
    """
    grid = u.grid
    x0 = tuple(int(i) for i in x0)
    if u.values[x0] != 0.0:
        raise FieldError(f"Node {x0} is not dead, u = [{u.values[x0]}]")

    center = grid.position(x0)
    lower = np.asarray(grid.origin)
    upper = lower + np.asarray(grid.extent)
    radius = 0.5 * float(min(np.min(center - lower), np.min(upper - center)))
    if radius < grid.h:
        raise FieldError(f"Node {x0} is too close to the boundary of the box")

    distances = np.linalg.norm(grid.coordinates() - center, axis=-1)
    ball = (distances <= radius) & (distances > 0)
    if not np.any(u.values[ball] > 0):
        return 0.0

    neighbours_positive = False
    for axis in range(grid.dim):
        for offset in (-1, 1):
            other = list(x0)
            other[axis] += offset
            if 0 <= other[axis] < grid.shape[axis] and u.values[tuple(other)] > 0:
                neighbours_positive = True
    if not neighbours_positive:
        raise FieldError(f"Node {x0} has no positive neighbour and is not on the free boundary")

    return float(np.max(u.values[ball] / distances[ball] ** p.alpha))

