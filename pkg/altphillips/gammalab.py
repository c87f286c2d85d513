"""Experiments as gamma tends to 2: density ratios, sweeps of free boundaries, recovery sequences and the liminf side
of the comparison with the Dirichlet-perimeter functional.
"""

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

import attr
import numpy as np
from attr import validators
from more_itertools import first
from scipy import ndimage
from sortedcontainers import SortedKeyList

from altphillips.energy import (
    EnergyBreakdown,
    bv_of_transform,
    check_admissible,
    crossing_dirichlet_energy,
    eval_F,
    eval_J,
    eval_J_layered,
)
from altphillips.field import (
    FieldError,
    Grid,
    IndicatorField,
    ScalarField,
    ball_mask,
    boundary_cells,
    distance_transform,
    gap_norms,
    hausdorff_distance,
    interface_band,
    positivity_set,
)
from altphillips.potential import ParameterRangeError, PotentialParams, make_params, transform_field
from altphillips.problems import BoundaryProblem, Pair
from altphillips.profile import exact_phi
from altphillips.solver import SolverOptions, minimize_J
from altphillips.util import PathLike, is_nonincreasing, least_squares_slope, rows_to_csv, serialize_text

logger = logging.getLogger(__name__)

#: Relative slack of the liminf comparison
LSC_TOLERANCE = 0.05

#: Number of radii used per density measurement
DENSITY_RADII = 6

SWEEP_COLUMNS = (
    "gamma",
    "h",
    "dirichlet",
    "potential",
    "total",
    "hausdorff",
    "density_min",
    "density_max",
    "l1_gap",
    "positivity_l1_gap",
    "l2_norm",
    "energy_bound",
    "bv_transform",
    "sweeps_used",
    "converged",
    "dead_fraction",
)


@attr.s(auto_exc=True)
class CollarError(ValueError):
    """Raised when the truncated field does not vanish on a collar around the smoothed dead set."""

    #: float: Width of the collar that was found
    collar: float = attr.ib()

    #: float: Grid spacing
    h: float = attr.ib()

    def __str__(self) -> str:
        return f"Collar of width [{self.collar}] is not wider than one cell [{self.h}], choose a larger eps"


@attr.s(auto_exc=True)
class SweepError(RuntimeError):
    """Wraps the failure of the job for a single gamma."""

    gamma: float = attr.ib()
    cause: str = attr.ib()

    def __str__(self) -> str:
        return f"Sweep job for gamma [{self.gamma}] failed: {self.cause}"


# Density


def _check_ratio(instance, attribute, value):
    if any(not 0.0 <= r <= 1.0 for r in value):
        raise ValueError(f"{attribute.name} must lie in [0, 1], was {value}")


@attr.s(slots=True, frozen=True)
class DensityReport:
    """Volume fractions of the positive and the dead set in balls around a node."""

    #: Tuple[float, ...]: The centre
    center: Tuple[float, ...] = attr.ib(converter=tuple)

    radii: List[float] = attr.ib(converter=list)
    ratios_positive: List[float] = attr.ib(converter=list, validator=_check_ratio)
    ratios_zero: List[float] = attr.ib(converter=list, validator=_check_ratio)

    @property
    def minimum(self) -> float:
        return min(min(self.ratios_positive), min(self.ratios_zero))

    @property
    def maximum(self) -> float:
        return max(max(self.ratios_positive), max(self.ratios_zero))

    def to_dict(self) -> dict:
        return attr.asdict(self)


def _clearance(grid: Grid, index: Sequence[int]) -> float:
    """Distance of a node to the boundary of the box."""
    return float(min(min(i, n - i) for i, n in zip(index, grid.n_cells)) * grid.h)


def density_scan(u: ScalarField, x0: Sequence[int], radii: Sequence[float]) -> DensityReport:
    """Counts the nodes of ``{u > 0}`` and ``{u = 0}`` in the balls of the given radii around node `x0`.

    Raises:
        ParameterRangeError: If a radius exceeds half the distance of `x0` to the box boundary
    """
    grid = u.grid
    x0 = tuple(int(i) for i in x0)
    limit = 0.5 * _clearance(grid, x0)
    center = grid.position(x0)

    positive, zero = [], []
    for r in radii:
        if not 0 < r <= limit * (1 + 1e-12):
            raise ParameterRangeError("r", r, f"radii must lie in (0, {limit}] around node {x0}")
        ball = ball_mask(grid, center, r).member
        count = np.count_nonzero(ball)
        n_positive = np.count_nonzero(ball & (u.values > 0))
        positive.append(n_positive / count)
        zero.append((count - n_positive) / count)

    return DensityReport(center=tuple(center), radii=list(radii), ratios_positive=positive, ratios_zero=zero)


def free_boundary_nodes(u: ScalarField) -> np.ndarray:
    """Indices of dead nodes with a positive axis neighbour, shape (k, dim)."""
    band = interface_band(positivity_set(u))
    return np.argwhere(band & (u.values == 0.0))


def central_free_boundary_node(u: ScalarField) -> Optional[Tuple[int, ...]]:
    """The free boundary node farthest from the box boundary, `None` if there is no free boundary."""
    nodes = free_boundary_nodes(u)
    if len(nodes) == 0:
        return None
    clearances = [_clearance(u.grid, node) for node in nodes]
    return tuple(int(i) for i in nodes[int(np.argmax(clearances))])


def density_radii(grid: Grid, x0: Sequence[int], count: int = DENSITY_RADII) -> List[float]:
    """Geometric radii from 8h up to 1/4, limited to half the clearance of `x0`; empty if no such radius exists."""
    r_max = min(0.25, 0.5 * _clearance(grid, x0))
    r_min = 8 * grid.h
    if r_max < r_min:
        return []
    return [float(r) for r in np.geomspace(r_min, r_max, count)]


def interior_ball_scan(u: ScalarField, x0: Sequence[int], radii: Sequence[float]) -> List[Tuple[float, float]]:
    """Radii of the largest balls inside ``{u > 0} ∩ B_r`` and ``{u = 0} ∩ B_r``, relative to r."""
    grid = u.grid
    center = grid.position(tuple(int(i) for i in x0))
    result = []
    for r in radii:
        ball = ball_mask(grid, center, r).member
        ratios = []
        for part in (ball & (u.values > 0), ball & (u.values == 0)):
            if not part.any():
                ratios.append(0.0)
                continue
            dist = distance_transform(IndicatorField(grid, ~part), method="edt").dist
            ratios.append(float(dist[part].max()) / r)
        result.append((ratios[0], ratios[1]))
    return result


def energy_scaling_slope(u: ScalarField, p: PotentialParams, x0: Sequence[int], radii: Sequence[float]) -> float:
    """Least-squares slope of log J(u, B_r(x0)) against log r; the theory predicts ``dim - alpha * gamma``."""
    center = u.grid.position(tuple(int(i) for i in x0))
    energies = [eval_J(u, p, ball_mask(u.grid, center, r)).total for r in radii]
    return least_squares_slope(np.log(radii), np.log(energies))


# Sweeps


def _check_metric(instance, attribute, value):
    if math.isnan(value):
        return
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{attribute.name} must be finite and nonnegative, was [{value}]")


@attr.s(slots=True, frozen=True)
class SweepRecord:
    """Measurements of one solve of a gamma sweep. Geometric metrics are NaN when the solution has no free boundary."""

    gamma: float = attr.ib(converter=float)
    h: float = attr.ib(converter=float)
    energy: EnergyBreakdown = attr.ib(validator=validators.instance_of(EnergyBreakdown))

    #: float: Hausdorff distance between the free boundary and the interface of the reference set
    fb_hausdorff_to_reference: float = attr.ib(converter=float, validator=_check_metric)

    density_min: float = attr.ib(converter=float, validator=_check_metric)
    density_max: float = attr.ib(converter=float, validator=_check_metric)

    #: float: L1 distance of the phase transform to the indicator of the reference positive set
    transform_l1_gap: float = attr.ib(converter=float, validator=_check_metric)

    #: float: L1 distance of the indicators of the positive sets
    positivity_l1_gap: float = attr.ib(default=math.nan, converter=float, validator=_check_metric)

    l2_norm: float = attr.ib(default=math.nan, converter=float, validator=_check_metric)

    #: float: l2_norm + J, the quantity that bounds sequences of minimizers uniformly
    energy_bound: float = attr.ib(default=math.nan, converter=float, validator=_check_metric)

    bv_transform: float = attr.ib(default=math.nan, converter=float, validator=_check_metric)
    sweeps_used: int = attr.ib(default=0)
    converged: bool = attr.ib(default=False)
    dead_fraction: float = attr.ib(default=0.0, converter=float, validator=_check_metric)

    def coarea_slack(self) -> float:
        """``J + 10h - bv_transform``, nonnegative when the discrete coarea inequality holds."""
        return self.energy.total + 10 * self.h - self.bv_transform

    def to_row(self) -> list:
        return [
            self.gamma,
            self.h,
            self.energy.dirichlet,
            self.energy.potential,
            self.energy.total,
            self.fb_hausdorff_to_reference,
            self.density_min,
            self.density_max,
            self.transform_l1_gap,
            self.positivity_l1_gap,
            self.l2_norm,
            self.energy_bound,
            self.bv_transform,
            self.sweeps_used,
            self.converged,
            self.dead_fraction,
        ]

    def to_dict(self) -> dict:
        result = attr.asdict(self)
        result["energy"] = self.energy.to_record(self.gamma, self.h)
        return result


def measure(u: ScalarField, p: PotentialParams, reference_dead: IndicatorField) -> dict:
    """All metrics of a sweep record for the field `u` against the dead set of the reference pair."""
    grid = u.grid
    energy = eval_J(u, p)
    positive = positivity_set(u)

    free_boundary = boundary_cells(positive)
    reference_interface = boundary_cells(reference_dead)
    if len(free_boundary) and len(reference_interface):
        hausdorff = hausdorff_distance(free_boundary, reference_interface)
    else:
        warnings.warn(f"No free boundary to compare at gamma [{p.gamma}]")
        hausdorff = math.nan

    density_min = density_max = math.nan
    x0 = central_free_boundary_node(u)
    radii = density_radii(grid, x0) if x0 is not None else []
    if radii:
        report = density_scan(u, x0, radii)
        density_min, density_max = report.minimum, report.maximum

    reference_positive = (~reference_dead.member).astype(float)
    l2_norm = gap_norms(grid, u.values, np.zeros(grid.shape))[1]
    return dict(
        gamma=p.gamma,
        h=grid.h,
        energy=energy,
        fb_hausdorff_to_reference=hausdorff,
        density_min=density_min,
        density_max=density_max,
        transform_l1_gap=gap_norms(grid, transform_field(p, u.values), reference_positive)[0],
        positivity_l1_gap=gap_norms(grid, positive.member.astype(float), reference_positive)[0],
        l2_norm=l2_norm,
        energy_bound=l2_norm + energy.total,
        bv_transform=bv_of_transform(u, p),
    )


def _sweep_job(problem: BoundaryProblem, gamma: float, grid: Grid, dead: np.ndarray, opts: SolverOptions):
    try:
        p = make_params(gamma)
        u, report = minimize_J(grid, p, problem.boundary(grid, p), opts)
        metrics = measure(u, p, IndicatorField(grid, dead))
    except Exception as e:
        raise SweepError(gamma, f"{type(e).__name__}: {e}") from e

    record = SweepRecord(
        **metrics, sweeps_used=report.sweeps_used, converged=report.converged, dead_fraction=report.dead_fraction
    )
    return record, u


def gamma_sweep(
    problem: BoundaryProblem,
    gammas: Sequence[float],
    grid: Grid,
    reference: Optional[Pair] = None,
    opts: Optional[SolverOptions] = None,
    jobs: int = 1,
    keep_fields: bool = False,
):
    """Solves `problem` for every gamma and measures the solutions against the reference pair.

    Jobs run in worker processes when `jobs` exceeds 1. Failures are raised as :class:`SweepError` with the gamma
    annotated. A free boundary distance that does not decrease in gamma is reported as a warning.

    Args:
        problem: The boundary data template
        gammas: Exponents to solve for
        grid: The grid
        reference: The limiting pair, by default the one of the problem template
        opts: Solver options
        jobs: Number of worker processes
        keep_fields: Whether to also return the solutions

    Returns:
        The records sorted by gamma, and if `keep_fields` is set the solutions in the same order
    """
    opts = SolverOptions() if opts is None else opts
    if reference is None:
        reference = problem.reference(grid, make_params(first(gammas)))
    if reference is None:
        raise FieldError(f"Problem [{problem.name}] has no reference pair, pass one explicitly")
    check_admissible(*reference)
    dead = reference[1].member

    results = SortedKeyList(key=lambda item: item[0].gamma)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(_sweep_job, problem, g, grid, dead, opts) for g in gammas]
            for future in futures:
                record, u = future.result()
                results.add((record, u))
                logger.info("Finished gamma %s", record.gamma)
    else:
        for g in gammas:
            results.add(_sweep_job(problem, g, grid, dead, opts))
            logger.info("Finished gamma %s", g)

    records = [record for record, _ in results]
    distances = [r.fb_hausdorff_to_reference for r in records if not math.isnan(r.fb_hausdorff_to_reference)]
    if not is_nonincreasing(distances):
        warnings.warn(f"Free boundary distances are not monotone in gamma: {distances}")

    if keep_fields:
        return records, [u for _, u in results]
    return records


def sweep_to_csv(records: Sequence[SweepRecord], path: PathLike = None) -> Optional[str]:
    """One row per gamma with the columns of :data:`SWEEP_COLUMNS`."""
    return serialize_text(rows_to_csv(SWEEP_COLUMNS, (r.to_row() for r in records)), path)


def hausdorff_trend_slope(records: Sequence[SweepRecord]) -> float:
    """Least-squares slope of the free boundary distance against 2 - gamma, positive when the free boundaries
    approach the reference."""
    usable = [r for r in records if not math.isnan(r.fb_hausdorff_to_reference)]
    return least_squares_slope([2.0 - r.gamma for r in usable], [r.fb_hausdorff_to_reference for r in usable])


def calibrate_density_floor(records: Sequence[SweepRecord], safety: float = 0.5) -> float:
    """Density floor from an oracle run: `safety` times the smallest measured density ratio.

    Raises:
        ValueError: If no record carries a density measurement
    """
    measured = [r.density_min for r in records if not math.isnan(r.density_min)]
    if not measured:
        raise ValueError("No record has a free boundary point to calibrate the density floor on")
    return safety * min(measured)


# Recovery sequences


def _validate_gammas(instance, attribute, value):
    if any(not 0.0 < g < 2.0 for g in value):
        raise ParameterRangeError("gamma_list", value, "all exponents must lie in (0, 2)")
    if any(b <= a for a, b in zip(value, value[1:])):
        raise ParameterRangeError("gamma_list", value, "exponents must increase towards 2")


@attr.s(slots=True, frozen=True)
class RecoveryConfig:
    """Parameters of :func:`recovery_sequence`."""

    #: float: Truncation level, the field is replaced by (u - 2 eps)^+
    eps: float = attr.ib(converter=float)

    #: Tuple[float, ...]: Exponents of the sequence, increasing towards 2
    gamma_list: Tuple[float, ...] = attr.ib(converter=lambda v: tuple(float(g) for g in v), validator=_validate_gammas)

    #: str: How the dead set is smoothed, ``erosion`` or ``none``
    smoothing: str = attr.ib(default="erosion", validator=validators.in_(("erosion", "none")))

    #: int: Number of cells the dead set is eroded by
    erosion_cells: int = attr.ib(default=1, converter=int)

    @eps.validator
    def _check_eps(self, attribute, value):
        if not value > 0:
            raise ParameterRangeError("eps", value, "eps must be positive")

    @erosion_cells.validator
    def _check_erosion_cells(self, attribute, value):
        if value < 1:
            raise ParameterRangeError("erosion_cells", value, "erosion must remove at least one cell")

    def to_dict(self) -> dict:
        result = attr.asdict(self)
        result["gamma_list"] = list(self.gamma_list)
        return result


@attr.s(slots=True, frozen=True)
class RecoveryEnergy:
    """Energies of one member of a recovery sequence."""

    gamma: float = attr.ib(converter=float)

    #: EnergyBreakdown: The nodal J
    nodal: EnergyBreakdown = attr.ib()

    #: float: J with the profile layer integrated by the coarea formula
    layered: float = attr.ib(converter=float)

    #: float: Width of the dead collar around the smoothed set
    collar: float = attr.ib(converter=float)

    #: float: L1 distance of the phase transform to the indicator of the complement of E
    transform_l1_gap: float = attr.ib(converter=float)

    def to_dict(self) -> dict:
        result = attr.asdict(self)
        result["nodal"] = attr.asdict(self.nodal)
        return result


def _recovery_parts(pair: Pair, cfg: RecoveryConfig, p_k: PotentialParams):
    u, E = pair
    check_admissible(u, E)
    grid = u.grid

    smoothed = E.member
    if cfg.smoothing == "erosion":
        smoothed = ndimage.binary_erosion(E.member, iterations=cfg.erosion_cells, border_value=1)
    dist = distance_transform(IndicatorField(grid, smoothed))
    truncated = np.maximum(u.values - 2.0 * cfg.eps, 0.0)

    alive = truncated > 0
    collar = float(dist.dist[alive].min()) if alive.any() else math.inf
    if collar <= grid.h:
        raise CollarError(collar, grid.h)

    profile = exact_phi(p_k, dist.dist)
    values = np.maximum(profile, truncated)
    return ScalarField(grid, values, u.boundary_mask), dist, profile >= truncated, collar


def recovery_sequence(pair: Pair, cfg: RecoveryConfig, p_k: PotentialParams) -> ScalarField:
    """Builds ``u_k = max(phi_k(d), (u - 2 eps)^+)`` with d the distance to the eroded dead set.

    Raises:
        AdmissibilityError: If the pair is not admissible
        FieldError: If the eroded dead set is empty
        CollarError: If the truncated field does not vanish on a collar wider than one cell
    """
    u_k, _, _, _ = _recovery_parts(pair, cfg, p_k)
    return u_k


def recovery_energy(pair: Pair, cfg: RecoveryConfig, p_k: PotentialParams) -> RecoveryEnergy:
    """Nodal and layered energies of the recovery field for `p_k`.

    Where the profile dominates, the layered energy integrates the profile by the coarea formula; elsewhere the nodal
    J of the truncated field is added, together with the Dirichlet energy of the edges joining the two parts.
    """
    u_k, dist, profile_part, collar = _recovery_parts(pair, cfg, p_k)
    grid = u_k.grid

    profile_region = IndicatorField(grid, profile_part)
    layered = eval_J_layered(dist, p_k, profile_region)
    if not profile_part.all():
        layered += eval_J(u_k, p_k, profile_region.complement()).total
        layered += crossing_dirichlet_energy(u_k, profile_region)

    reference_positive = (~pair[1].member).astype(float)
    return RecoveryEnergy(
        gamma=p_k.gamma,
        nodal=eval_J(u_k, p_k),
        layered=layered,
        collar=collar,
        transform_l1_gap=gap_norms(grid, transform_field(p_k, u_k.values), reference_positive)[0],
    )


@attr.s(slots=True, frozen=True)
class LscResult:
    """Outcome of :func:`lsc_check`."""

    passed: bool = attr.ib()

    #: float: Smallest tail energy minus F of the limit
    margin: float = attr.ib()

    #: float: F of the limit pair
    limit_energy: float = attr.ib()

    def to_dict(self) -> dict:
        return attr.asdict(self)


def lsc_check(
    u_seq: Sequence[Tuple[PotentialParams, ScalarField]],
    limit: Pair,
    energies: Optional[Sequence[float]] = None,
    tail: int = 1,
) -> LscResult:
    """Compares the tail of a sequence of energies with F of the limit pair.

    Args:
        u_seq: Pairs of potential and field, ordered towards gamma = 2
        limit: The limit pair
        energies: Energies to use instead of the nodal J of the fields, e.g. layered ones
        tail: Number of trailing members the minimum is taken over

    Returns:
        Pass if the margin is at least -5% of F
    """
    if tail < 1 or tail > len(u_seq):
        raise ValueError(f"Tail [{tail}] must lie in [1, {len(u_seq)}]")
    if energies is None:
        energies = [eval_J(u, p).total for p, u in u_seq]
    elif len(energies) != len(u_seq):
        raise ValueError("Need one energy per sequence member")

    limit_energy = eval_F(*limit).total
    margin = min(energies[-tail:]) - limit_energy
    return LscResult(passed=margin >= -LSC_TOLERANCE * limit_energy, margin=margin, limit_energy=limit_energy)
