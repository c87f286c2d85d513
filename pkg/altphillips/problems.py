"""Named Dirichlet problems and, where known in closed form, their limiting pairs (u, E).

Problems are plain values so that sweep jobs can be shipped to worker processes.
"""

from typing import Callable, Dict, Optional, Tuple

import attr
import numpy as np
from attr import validators

from altphillips.field import FieldError, Grid, IndicatorField, ScalarField, outer_layer
from altphillips.potential import PotentialParams, e_to_j_scale
from altphillips.profile import exact_phi
from altphillips.solver import harmonic_extension

Pair = Tuple[ScalarField, IndicatorField]


def _zero_data(problem: "BoundaryProblem", grid: Grid, p: PotentialParams) -> np.ndarray:
    return np.zeros(grid.shape)


def _constant_data(problem: "BoundaryProblem", grid: Grid, p: PotentialParams) -> np.ndarray:
    return np.full(grid.shape, float(problem.params.get("value", 1.0)))


def _front_data(problem: "BoundaryProblem", grid: Grid, p: PotentialParams) -> np.ndarray:
    x1 = grid.coordinates()[..., 0]
    return exact_phi(p, np.maximum(x1 - problem.front, 0.0))


def _chord_data(problem: "BoundaryProblem", grid: Grid, p: PotentialParams) -> np.ndarray:
    if grid.dim != 2:
        raise FieldError("The chord problem lives on 2d grids")
    x1 = grid.coordinates()[..., 0]
    a = problem.band
    lo, hi = grid.origin[0], grid.origin[0] + grid.extent[0]
    outside_band = (x1 < lo + a * (hi - lo)) | (x1 > hi - a * (hi - lo))
    level = e_to_j_scale(p) * float(problem.params.get("psi0", 1.0))
    return np.where(outside_band, level, 0.0)


_DATA: Dict[str, Callable] = {
    "zero": _zero_data,
    "constant": _constant_data,
    "phi-right": _front_data,
    "halfplane": _front_data,
    "chord": _chord_data,
}

_DEFAULT_FRONTS = {"phi-right": 0.0, "halfplane": 0.5}


@attr.s(slots=True, frozen=True)
class BoundaryProblem:
    """A named Dirichlet data template.

    ``zero`` and ``constant`` (parameter ``value``) fix all outer nodes to one value. ``phi-right`` and ``halfplane``
    prescribe ``phi((x1 - front)^+)``, a single straight free boundary at ``x1 = front`` (parameter ``front``, by
    default 0 and 1/2). ``chord`` puts ``e_to_j_scale * psi0`` on the outer nodes except on the middle band
    ``a < x1 < 1 - a`` (relative to the box, parameter ``band``), where the data vanish; the dead set of the limit is
    the vertical strip above the band.
    """

    #: str: Template name
    name: str = attr.ib(validator=validators.in_(tuple(_DATA)))

    #: dict: Template parameters
    params: dict = attr.ib(factory=dict, converter=dict)

    @property
    def front(self) -> float:
        return float(self.params.get("front", _DEFAULT_FRONTS.get(self.name, 0.0)))

    @property
    def band(self) -> float:
        band = float(self.params.get("band", 0.125))
        if not 0.0 < band < 0.5:
            raise FieldError(f"Band must lie in (0, 1/2), was [{band}]")
        return band

    def boundary(self, grid: Grid, p: PotentialParams) -> ScalarField:
        """Dirichlet data on the outer layer of `grid`; interior values are zero."""
        mask = outer_layer(grid)
        values = np.where(mask, _DATA[self.name](self, grid, p), 0.0)
        return ScalarField(grid, values, mask)

    def dead_set(self, grid: Grid) -> Optional[IndicatorField]:
        """The dead set of the limiting pair, or `None` if the limit has no free boundary."""
        x1 = grid.coordinates()[..., 0]
        if self.name in _DEFAULT_FRONTS:
            return IndicatorField(grid, x1 <= self.front + 1e-12 * grid.h)
        if self.name == "chord":
            lo, hi = grid.origin[0], grid.origin[0] + grid.extent[0]
            a = self.band * (hi - lo)
            return IndicatorField(grid, (x1 >= lo + a) & (x1 <= hi - a))
        if self.name == "zero":
            return IndicatorField(grid, np.ones(grid.shape, dtype=bool))
        return None

    def reference(self, grid: Grid, p: PotentialParams) -> Optional[Pair]:
        """The limiting pair as gamma tends to 2, where it is known.

        For the front problems this is ``(0, {x1 <= front})``, the pair of the Dirichlet-perimeter functional. For the
        chord problem, u is the harmonic function outside the strip with the chord data and zero on the strip.
        """
        dead = self.dead_set(grid)
        if dead is None:
            return None
        if self.name == "chord":
            data = self.boundary(grid, p)
            mask = data.boundary_mask | dead.member
            u = harmonic_extension(grid, ScalarField(grid, np.where(dead.member, 0.0, data.values), mask))
            return ScalarField(grid, u.values), dead
        return ScalarField(grid, np.zeros(grid.shape)), dead

    def to_dict(self) -> dict:
        return attr.asdict(self)


def make_problem(name: str, **params) -> BoundaryProblem:
    """Creates the problem template `name`.

    Raises:
        ValueError: If there is no such template
    """
    if name not in _DATA:
        raise ValueError(f"Unknown boundary problem [{name}], expected one of {sorted(_DATA)}")
    return BoundaryProblem(name, params)


def problem_names():
    return sorted(_DATA)
