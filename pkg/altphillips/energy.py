"""Discrete energies: the nodal functional J, the Dirichlet-perimeter functional F and the perimeter estimators.

All sums are nodal quadratures. Axis edges count once and enter a region only when both end nodes are members.
"""

import itertools
from typing import Optional, Tuple

import attr
import numpy as np
from scipy import ndimage

from altphillips.field import DistanceField, FieldError, Grid, IndicatorField, ScalarField, full_grid
from altphillips.potential import PotentialParams, mass_function, potential_density, transform_field
from altphillips.profile import exact_phi

#: Width in cells of the Gaussian that smooths indicators before contouring
PERIMETER_SMOOTHING = 1.5

PERIMETER_METHODS = ("marching-squares", "edge-count")


@attr.s(auto_exc=True)
class AdmissibilityError(ValueError):
    """Raised when u is positive on a member node of E."""

    #: Tuple[int, ...]: Index of the first offending node
    index: Tuple[int, ...] = attr.ib()

    #: float: The value of u there
    value: float = attr.ib()

    def __str__(self) -> str:
        return f"Pair is not admissible: u = [{self.value}] > 0 at node {self.index} of E"


@attr.s(slots=True, frozen=True)
class EnergyBreakdown:
    """Both parts of J on a region, see :func:`eval_J`."""

    #: float: Discrete Dirichlet energy
    dirichlet: float = attr.ib(converter=float)

    #: float: Nodal quadrature of the potential
    potential: float = attr.ib(converter=float)

    #: float: dirichlet + potential
    total: float = attr.ib(converter=float)

    #: float: Number of region nodes times the cell volume
    region_volume: float = attr.ib(converter=float)

    @total.validator
    def _check_total(self, attribute, value):
        if value != self.dirichlet + self.potential:
            raise ValueError(f"Total [{value}] is not dirichlet + potential")

    @classmethod
    def of(cls, dirichlet: float, potential: float, region_volume: float) -> "EnergyBreakdown":
        return cls(dirichlet, potential, float(dirichlet) + float(potential), region_volume)

    def to_record(self, gamma: float, h: float) -> dict:
        """JSON record with the keys gamma, h, dirichlet, potential, total and region_volume."""
        return {"gamma": float(gamma), "h": float(h), **attr.asdict(self)}


@attr.s(slots=True, frozen=True)
class PairEnergy:
    """Both parts of F on a region, see :func:`eval_F`."""

    dirichlet: float = attr.ib(converter=float)
    perimeter: float = attr.ib(converter=float)
    total: float = attr.ib(converter=float)

    @total.validator
    def _check_total(self, attribute, value):
        if value != self.dirichlet + self.perimeter:
            raise ValueError(f"Total [{value}] is not dirichlet + perimeter")

    @classmethod
    def of(cls, dirichlet: float, perimeter: float) -> "PairEnergy":
        return cls(dirichlet, perimeter, float(dirichlet) + float(perimeter))

    def to_dict(self) -> dict:
        return attr.asdict(self)


def _resolve_region(grid: Grid, region: Optional[IndicatorField]) -> np.ndarray:
    if region is None:
        return full_grid(grid).member
    if region.grid != grid:
        raise FieldError("Region lives on a different grid")
    return region.member


def _axis_edges(grid: Grid, axis: int) -> Tuple[tuple, tuple]:
    lower = [slice(None)] * grid.dim
    upper = [slice(None)] * grid.dim
    lower[axis] = slice(None, -1)
    upper[axis] = slice(1, None)
    return tuple(lower), tuple(upper)


def _edge_sum(grid: Grid, values: np.ndarray, member: np.ndarray, term) -> float:
    total = 0.0
    for axis in range(grid.dim):
        lower, upper = _axis_edges(grid, axis)
        inside = member[lower] & member[upper]
        total += float(term(values[upper] - values[lower])[inside].sum())
    return total


def dirichlet_energy(u: ScalarField, region: Optional[IndicatorField] = None) -> float:
    """Sum of squared forward differences over region edges, scaled by h^(dim - 2)."""
    member = _resolve_region(u.grid, region)
    return _edge_sum(u.grid, u.values, member, np.square) * u.grid.h ** (u.grid.dim - 2)


def crossing_dirichlet_energy(u: ScalarField, region: IndicatorField) -> float:
    """Dirichlet energy of the edges with exactly one endpoint in `region`, scaled like :func:`dirichlet_energy`.

    Splitting the grid into `region` and its complement, the nodal J of the whole grid is the sum of the two partial
    energies and this term.
    """
    member = _resolve_region(u.grid, region)
    total = 0.0
    for axis in range(u.grid.dim):
        lower, upper = _axis_edges(u.grid, axis)
        crossing = member[lower] != member[upper]
        total += float(np.square(u.values[upper] - u.values[lower])[crossing].sum())
    return total * u.grid.h ** (u.grid.dim - 2)


def eval_J(u: ScalarField, p: PotentialParams, region: Optional[IndicatorField] = None) -> EnergyBreakdown:
    """Evaluates the discrete J on `region`, by default on the whole grid.

    The potential vanishes exactly on nodes with value 0.

    Args:
        u: The field
        p: The potential
        region: Nodes to integrate over

    Returns:
        The Dirichlet part, the potential part and their sum
    """
    grid = u.grid
    member = _resolve_region(grid, region)
    dirichlet = dirichlet_energy(u, IndicatorField(grid, member))
    potential = float(potential_density(p, u.values)[member].sum()) * grid.cell_volume
    return EnergyBreakdown.of(dirichlet, potential, np.count_nonzero(member) * grid.cell_volume)


# Contours


def contour_segments(
    values: np.ndarray, grid: Grid, level: float, region: Optional[IndicatorField] = None
) -> np.ndarray:
    """Marching squares on the nodal values of a 2d grid.

    A node counts as inside when its value exceeds `level`. Crossing points are linear interpolates along cell edges,
    saddle cells are resolved by the average of their four corners. Only cells whose corners all belong to `region`
    contribute.

    Returns:
        Segments as an array of shape (k, 2, 2)
    """
    if grid.dim != 2:
        raise FieldError("Contours are only defined on 2d grids")
    values = np.asarray(values, dtype=float)
    member = _resolve_region(grid, region)

    v00, v10 = values[:-1, :-1], values[1:, :-1]
    v01, v11 = values[:-1, 1:], values[1:, 1:]
    in00, in10, in01, in11 = (v > level for v in (v00, v10, v01, v11))
    cells = member[:-1, :-1] & member[1:, :-1] & member[:-1, 1:] & member[1:, 1:]

    x, y = grid.axes()
    x0 = x[:-1, None] * np.ones_like(v00)
    y0 = y[None, :-1] * np.ones_like(v00)
    h = grid.h

    def fraction(va, vb):
        denominator = np.where(vb != va, vb - va, 1.0)
        return np.clip((level - va) / denominator, 0.0, 1.0)

    # Bottom, right, top and left edge of every cell
    crossings = [in00 != in10, in10 != in11, in01 != in11, in00 != in01]
    points = [
        (x0 + h * fraction(v00, v10), y0),
        (x0 + h, y0 + h * fraction(v10, v11)),
        (x0 + h * fraction(v01, v11), y0 + h),
        (x0, y0 + h * fraction(v00, v01)),
    ]
    count = sum(c.astype(int) for c in crossings)

    pieces = []

    def emit(mask, a, b):
        if mask.any():
            start = np.stack([points[a][0][mask], points[a][1][mask]], axis=-1)
            end = np.stack([points[b][0][mask], points[b][1][mask]], axis=-1)
            pieces.append(np.stack([start, end], axis=1))

    simple = cells & (count == 2)
    for a, b in itertools.combinations(range(4), 2):
        emit(simple & crossings[a] & crossings[b], a, b)

    saddle = cells & (count == 4)
    if saddle.any():
        center_inside = (v00 + v10 + v01 + v11) / 4.0 > level
        # Inside corners on the 00-11 diagonal and an inside centre join the diagonal
        cut_10_01 = saddle & (in00 == center_inside)
        cut_00_11 = saddle & ~(in00 == center_inside)
        emit(cut_10_01, 0, 1)
        emit(cut_10_01, 2, 3)
        emit(cut_00_11, 0, 3)
        emit(cut_00_11, 1, 2)

    if not pieces:
        return np.zeros((0, 2, 2))
    return np.concatenate(pieces)


def _segments_length(segments: np.ndarray) -> float:
    if len(segments) == 0:
        return 0.0
    return float(np.linalg.norm(segments[:, 1] - segments[:, 0], axis=-1).sum())


def _level_measure(values: np.ndarray, grid: Grid, level: float, member: np.ndarray) -> float:
    """Length of a level set in 2d, number of level crossings in 1d."""
    if grid.dim == 1:
        inside = values > level
        return float(np.count_nonzero((inside[1:] != inside[:-1]) & member[1:] & member[:-1]))
    return _segments_length(contour_segments(values, grid, level, IndicatorField(grid, member)))


# Perimeter


def perimeter(
    source: IndicatorField,
    region: Optional[IndicatorField] = None,
    method: str = "marching-squares",
    smoothing: float = PERIMETER_SMOOTHING,
) -> float:
    """Estimates the perimeter of `source` inside `region`.

    In 1d both methods count the cells where the membership changes. In 2d the default contours the 0.5 level of the
    indicator after smoothing it with a Gaussian of width `smoothing` cells; ``edge-count`` returns
    ``h^(dim-1)`` times the number of cut axis edges, which overestimates diagonal interfaces by up to sqrt(2).

    Raises:
        FieldError: On an unknown method
    """
    if method not in PERIMETER_METHODS:
        raise FieldError(f"Unknown perimeter method [{method}], expected one of {PERIMETER_METHODS}")

    grid = source.grid
    member = _resolve_region(grid, region)
    indicator = source.member.astype(float)

    if method == "edge-count":
        cut_edges = _edge_sum(grid, indicator, member, lambda d: d != 0)
        return cut_edges * grid.h ** (grid.dim - 1)

    if grid.dim == 1:
        return _level_measure(indicator, grid, 0.5, member)

    if source.is_empty() or source.count == grid.size:
        return 0.0
    smoothed = ndimage.gaussian_filter(indicator, sigma=smoothing, mode="nearest") if smoothing > 0 else indicator
    return _segments_length(contour_segments(smoothed, grid, 0.5, IndicatorField(grid, member)))


def check_admissible(u: ScalarField, E: IndicatorField):
    """Raises :class:`AdmissibilityError` at the first node of E where u is positive."""
    if E.grid != u.grid:
        raise FieldError("Pair lives on different grids")

    offending = np.argwhere(E.member & (u.values > 0))
    if len(offending):
        index = tuple(int(i) for i in offending[0])
        raise AdmissibilityError(index, float(u.values[index]))


def eval_F(
    u: ScalarField, E: IndicatorField, region: Optional[IndicatorField] = None, method: str = "marching-squares"
) -> PairEnergy:
    """Evaluates the Dirichlet-perimeter functional on an admissible pair.

    Raises:
        AdmissibilityError: If u is positive on a member node of E
    """
    check_admissible(u, E)
    return PairEnergy.of(dirichlet_energy(u, region), perimeter(E, region, method=method))


def bv_of_transform(u: ScalarField, p: PotentialParams, region: Optional[IndicatorField] = None) -> float:
    """Discrete total variation of ``v = u^(1 - gamma/2)`` over region edges, scaled by h^(dim - 1)."""
    member = _resolve_region(u.grid, region)
    v = transform_field(p, u.values)
    return _edge_sum(u.grid, v, member, np.abs) * u.grid.h ** (u.grid.dim - 1)


def eval_J_layered(
    dist: DistanceField, p: PotentialParams, region: Optional[IndicatorField] = None, cutoff: Optional[float] = None
) -> float:
    """J of the distance profile ``phi(d)`` by the coarea formula.

    Integrates the measure of the level sets ``{d = t}`` inside `region` against the exact profile mass, one level per
    grid spacing at the midpoint of the interval. The mass of an interval is taken in closed form, so the thin
    transition layer near ``d = 0`` is accounted for even when no node lies inside it.

    Args:
        dist: Distances to the dead set
        p: The potential of the profile
        region: Nodes to integrate over
        cutoff: Largest distance considered, by default the largest distance on the grid
    """
    grid = dist.grid
    member = _resolve_region(grid, region)
    top = float(dist.dist[member].max()) if member.any() else 0.0
    cutoff = top if cutoff is None else min(cutoff, top)

    h = grid.h
    n_levels = int(np.ceil(cutoff / h))
    if n_levels == 0:
        return 0.0

    edges = np.minimum(h * np.arange(n_levels + 1), cutoff)
    masses = np.diff(mass_function(p, exact_phi(p, edges)))
    levels = 0.5 * (edges[1:] + edges[:-1])
    return float(sum(m * _level_measure(dist.dist, grid, t, member) for t, m in zip(levels, masses) if m > 0))
