"""Node-centred fields on uniform grids over boxes in dimension 1 and 2.

Arrays are indexed like the coordinates, axis 0 runs along x1 and axis 1 along x2. Dirichlet data lives on the
outermost node layer unless a field says otherwise.
"""

import math
from io import StringIO
from typing import IO, List, Optional, Sequence, Tuple, Union

import attr
import numpy as np
from attr import validators
from scipy import interpolate, ndimage, spatial

from altphillips.potential import PotentialParams
from altphillips.util import PathLike, serialize_text

# Brute force distance transforms are used while nodes * members stays below this
_BRUTE_FORCE_LIMIT = 4_000_000


@attr.s(auto_exc=True)
class FieldError(ValueError):
    """Raised for malformed fields and for operations a field does not support."""

    #: str: What went wrong
    description: str = attr.ib()

    def __str__(self) -> str:
        return self.description


def _float_tuple(values) -> Tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(values))


def _int_tuple(values) -> Tuple[int, ...]:
    return tuple(int(v) for v in np.atleast_1d(values))


@attr.s(slots=True, frozen=True)
class Grid:
    """A uniform grid with spacing `h` over the box ``origin + [0, n_cells * h]``."""

    #: int: Space dimension, 1 or 2
    dim: int = attr.ib(validator=validators.in_((1, 2)))

    #: Tuple[float, ...]: Lower corner of the box
    origin: Tuple[float, ...] = attr.ib(converter=_float_tuple)

    #: Tuple[int, ...]: Number of cells per axis
    n_cells: Tuple[int, ...] = attr.ib(converter=_int_tuple)

    #: float: The spacing, shared by all axes
    h: float = attr.ib(converter=float)

    @origin.validator
    def _check_origin(self, attribute, value):
        if len(value) != self.dim:
            raise FieldError(f"Origin {value} does not match dimension [{self.dim}]")

    @n_cells.validator
    def _check_n_cells(self, attribute, value):
        if len(value) != self.dim or min(value) < 1:
            raise FieldError(f"Cell counts {value} do not describe a {self.dim}d grid")

    @h.validator
    def _check_h(self, attribute, value):
        if not value > 0 or not math.isfinite(value):
            raise FieldError(f"Spacing must be positive, was [{value}]")

    @classmethod
    def box(cls, extent: Sequence[float], n_cells: Sequence[int], origin: Optional[Sequence[float]] = None) -> "Grid":
        """Creates the grid over ``origin + [0, extent]`` with the given number of cells per axis.

        Raises:
            FieldError: If the axes would need different spacings
        """
        extent = _float_tuple(extent)
        n_cells = _int_tuple(n_cells)
        if len(extent) != len(n_cells):
            raise FieldError(f"Extent {extent} and cell counts {n_cells} differ in dimension")
        spacings = [e / n for e, n in zip(extent, n_cells)]
        if not np.allclose(spacings, spacings[0], rtol=1e-12, atol=0.0):
            raise FieldError(f"Axes have different spacings {spacings}")
        origin = (0.0,) * len(extent) if origin is None else origin
        return cls(dim=len(extent), origin=origin, n_cells=n_cells, h=spacings[0])

    @property
    def extent(self) -> Tuple[float, ...]:
        return tuple(n * self.h for n in self.n_cells)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(n + 1 for n in self.n_cells)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def axes(self) -> List[np.ndarray]:
        return [o + self.h * np.arange(n + 1) for o, n in zip(self.origin, self.n_cells)]

    def coordinates(self) -> np.ndarray:
        """Node positions as an array of shape ``shape + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def position(self, index: Sequence[int]) -> np.ndarray:
        return np.array([o + self.h * i for o, i in zip(self.origin, index)])

    def nearest_node(self, x: Sequence[float]) -> Tuple[int, ...]:
        """Index of the node closest to `x`, clipped to the grid."""
        x = _float_tuple(x)
        return tuple(
            int(min(max(round((xi - o) / self.h), 0), n)) for xi, o, n in zip(x, self.origin, self.n_cells)
        )

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> bool:
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        lower = np.asarray(self.origin) - tol * self.h
        upper = np.asarray(self.origin) + np.asarray(self.extent) + tol * self.h
        return bool(np.all(points >= lower) and np.all(points <= upper))

    def header(self) -> str:
        fields = [str(self.dim)] + [str(n) for n in self.n_cells] + [repr(self.h)] + [repr(o) for o in self.origin]
        return " ".join(fields)


def outer_layer(grid: Grid) -> np.ndarray:
    """Boolean mask of the outermost node layer."""
    mask = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        index = [slice(None)] * grid.dim
        index[axis] = 0
        mask[tuple(index)] = True
        index[axis] = -1
        mask[tuple(index)] = True
    return mask


def _check_shape(grid: Grid, values: np.ndarray, what: str):
    if values.shape != grid.shape:
        raise FieldError(f"Expected {what} of shape {grid.shape}, got {values.shape}")


@attr.s(slots=True, frozen=True)
class ScalarField:
    """Nonnegative nodal values of u together with the nodes whose values are fixed Dirichlet data."""

    #: Grid: The grid
    grid: Grid = attr.ib(validator=validators.instance_of(Grid))

    #: np.ndarray: Values per node, nonnegative
    values: np.ndarray = attr.ib(converter=lambda v: np.array(v, dtype=float), eq=False)

    #: np.ndarray: True on Dirichlet nodes
    boundary_mask: np.ndarray = attr.ib(
        default=attr.Factory(lambda self: outer_layer(self.grid), takes_self=True),
        converter=lambda v: np.array(v, dtype=bool),
        eq=False,
    )

    @values.validator
    def _check_values(self, attribute, value):
        _check_shape(self.grid, value, "values")
        if np.any(value < 0):
            raise FieldError(f"Field values must be nonnegative, minimum is [{value.min()}]")

    @boundary_mask.validator
    def _check_boundary_mask(self, attribute, value):
        _check_shape(self.grid, value, "boundary mask")

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return attr.evolve(self, values=values)

    def to_text(self, path: PathLike = None) -> Optional[str]:
        """Serializes the field as header line followed by one value per line in row-major order.

        Args:
            path: File path, if `None` is provided the result is returned as a string

        Returns:
            If `path` is None, then the text representation is returned
        """
        return serialize_text(_render(self.grid, (repr(float(v)) for v in self.values.ravel())), path)


@attr.s(slots=True, frozen=True)
class IndicatorField:
    """A node set, e.g. E, {u > 0} or a ball."""

    #: Grid: The grid
    grid: Grid = attr.ib(validator=validators.instance_of(Grid))

    #: np.ndarray: True on member nodes
    member: np.ndarray = attr.ib(converter=lambda v: np.array(v, dtype=bool), eq=False)

    @member.validator
    def _check_member(self, attribute, value):
        _check_shape(self.grid, value, "membership")

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.member))

    def is_empty(self) -> bool:
        return not self.member.any()

    def complement(self) -> "IndicatorField":
        return IndicatorField(self.grid, ~self.member)

    def intersection(self, other: "IndicatorField") -> "IndicatorField":
        return IndicatorField(self.grid, self.member & other.member)

    def volume(self) -> float:
        return self.count * self.grid.cell_volume

    def to_text(self, path: PathLike = None) -> Optional[str]:
        return serialize_text(_render(self.grid, ("1" if m else "0" for m in self.member.ravel())), path)


@attr.s(slots=True, frozen=True)
class DistanceField:
    """Euclidean distance of every node to the nearest member node of a source set."""

    #: Grid: The grid
    grid: Grid = attr.ib(validator=validators.instance_of(Grid))

    #: np.ndarray: Distances, zero on the source set
    dist: np.ndarray = attr.ib(converter=lambda v: np.array(v, dtype=float), eq=False)

    @dist.validator
    def _check_dist(self, attribute, value):
        _check_shape(self.grid, value, "distances")


def full_grid(grid: Grid) -> IndicatorField:
    return IndicatorField(grid, np.ones(grid.shape, dtype=bool))


def ball_mask(grid: Grid, center: Sequence[float], r: float) -> IndicatorField:
    """Nodes with ``|x - center| <= r``."""
    if not r > 0:
        raise FieldError(f"Radius must be positive, was [{r}]")
    offsets = grid.coordinates() - np.asarray(_float_tuple(center))
    return IndicatorField(grid, np.linalg.norm(offsets, axis=-1) <= r + 1e-9 * grid.h)


def annulus_mask(grid: Grid, center: Sequence[float], r_in: float, r_out: float) -> IndicatorField:
    """Nodes with ``r_in < |x - center| <= r_out``."""
    if not 0 <= r_in < r_out:
        raise FieldError(f"Need 0 <= r_in < r_out, got [{r_in}, {r_out}]")
    distances = np.linalg.norm(grid.coordinates() - np.asarray(_float_tuple(center)), axis=-1)
    return IndicatorField(grid, (distances > r_in) & (distances <= r_out + 1e-9 * grid.h))


def distance_transform(source: IndicatorField, method: str = "auto") -> DistanceField:
    """Exact Euclidean distance from every node to the nearest member node.

    Args:
        source: The nonempty source set
        method: ``brute`` compares all node/member pairs, ``edt`` uses the exact linear-time transform of
            :func:`scipy.ndimage.distance_transform_edt`, ``auto`` picks brute force for small problems

    Raises:
        FieldError: If the source set is empty or the method is unknown
    """
    if source.is_empty():
        raise FieldError("Distance transform of an empty set")
    if method not in ("auto", "brute", "edt"):
        raise FieldError(f"Unknown distance transform method [{method}]")

    grid = source.grid
    if method == "auto":
        method = "brute" if grid.size * source.count <= _BRUTE_FORCE_LIMIT else "edt"

    if method == "edt":
        dist = ndimage.distance_transform_edt(~source.member, sampling=grid.h)
        return DistanceField(grid, dist)

    nodes = grid.coordinates().reshape(-1, grid.dim)
    members = nodes[source.member.ravel()]
    chunks = np.array_split(nodes, max(1, (len(nodes) * len(members)) // 1_000_000))
    dist = np.concatenate([spatial.distance_matrix(chunk, members).min(axis=1) for chunk in chunks])
    dist[source.member.ravel()] = 0.0
    return DistanceField(grid, dist.reshape(grid.shape))


def rescale(
    u: ScalarField, p: PotentialParams, y0: Sequence[float], lam: float, target: Optional[Grid] = None
) -> ScalarField:
    """Blows `u` up around `y0`: ``u_tilde(x) = u(y0 + lam x) / lam^alpha``.

    Values are sampled by multilinear interpolation. The result lives on `target`, by default on the grid of `u`.

    Raises:
        FieldError: If the image of the target box is not contained in the box of `u`
    """
    if not lam > 0:
        raise FieldError(f"Scale must be positive, was [{lam}]")

    target = u.grid if target is None else target
    if target.dim != u.grid.dim:
        raise FieldError("Rescaling needs grids of equal dimension")

    mapped = np.asarray(_float_tuple(y0)) + lam * target.coordinates()
    if not u.grid.contains(mapped):
        raise FieldError(f"Rescaling by [{lam}] around {tuple(y0)} samples outside the box of the field")

    interpolator = interpolate.RegularGridInterpolator(u.grid.axes(), u.values, method="linear")
    sampled = interpolator(mapped.reshape(-1, target.dim)).reshape(target.shape)
    return ScalarField(target, np.maximum(sampled, 0.0) / lam ** p.alpha)


def positivity_set(u: ScalarField, dead_tol: float = 0.0) -> IndicatorField:
    """Nodes where u exceeds `dead_tol`; with the default this is the literal set {u > 0}."""
    if dead_tol < 0:
        raise FieldError(f"dead_tol must be nonnegative, was [{dead_tol}]")
    return IndicatorField(u.grid, u.values > dead_tol)


def interface_band(source: IndicatorField) -> np.ndarray:
    """Boolean mask of nodes on either side of a member/non-member axis edge."""
    band = np.zeros(source.grid.shape, dtype=bool)
    member = source.member
    for axis in range(source.grid.dim):
        lower = [slice(None)] * source.grid.dim
        upper = [slice(None)] * source.grid.dim
        lower[axis] = slice(None, -1)
        upper[axis] = slice(1, None)
        cut = member[tuple(lower)] != member[tuple(upper)]
        band[tuple(lower)] |= cut
        band[tuple(upper)] |= cut
    return band


def boundary_cells(source: IndicatorField) -> np.ndarray:
    """Positions of the interface band of `source` as an array of shape (k, dim)."""
    return source.grid.coordinates()[interface_band(source)].reshape(-1, source.grid.dim)


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two finite point sets.

    Raises:
        FieldError: If one of the sets is empty
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise FieldError("Hausdorff distance of an empty point set")
    a = a.reshape(len(a), -1)
    b = b.reshape(len(b), -1)

    a_to_b, _ = spatial.cKDTree(b).query(a)
    b_to_a, _ = spatial.cKDTree(a).query(b)
    return float(max(a_to_b.max(), b_to_a.max()))


def gap_norms(grid: Grid, a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    """Nodal quadrature of the L1 and L2 distance between two nodal arrays on `grid`."""
    difference = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return (
        float(difference.sum() * grid.cell_volume),
        float(math.sqrt((difference ** 2).sum() * grid.cell_volume)),
    )


def field_gap_norms(a: ScalarField, b: ScalarField) -> Tuple[float, float]:
    """L1 and L2 distance of two fields on the same grid.

    Raises:
        FieldError: If the fields live on different grids
    """
    if a.grid != b.grid:
        raise FieldError("Gap norms need fields on the same grid")
    return gap_norms(a.grid, a.values, b.values)


# Text format


def _render(grid: Grid, lines) -> str:
    out = StringIO()
    out.write(grid.header())
    out.write("\n")
    for line in lines:
        out.write(line)
        out.write("\n")
    return out.getvalue()


def _parse(source: Union[IO, str]) -> Tuple[Grid, np.ndarray]:
    text = source if isinstance(source, str) else source.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    lines = text.splitlines()
    if not lines:
        raise FieldError("Field file is empty")

    header = lines[0].split()
    try:
        dim = int(header[0])
        if dim not in (1, 2) or len(header) != 2 + 2 * dim:
            raise FieldError(f"Malformed field header [{lines[0]}]")
        n_cells = [int(v) for v in header[1 : 1 + dim]]
        h = float(header[1 + dim])
        origin = [float(v) for v in header[2 + dim :]]
        values = np.array([float(line) for line in lines[1:] if line.strip()], dtype=float)
    except (IndexError, ValueError) as e:
        if isinstance(e, FieldError):
            raise
        raise FieldError(f"Malformed field file: {e}")

    grid = Grid(dim=dim, origin=origin, n_cells=n_cells, h=h)
    if values.size != grid.size:
        raise FieldError(f"Field file has [{values.size}] values, header announces [{grid.size}]")
    return grid, values.reshape(grid.shape)


def load_field_from_text(source: Union[IO, str]) -> ScalarField:
    """Loads a scalar field written by :meth:`ScalarField.to_text`.

    Args:
        source: The text or a file-like object containing it

    Returns:
        The field, with Dirichlet data on the outer layer
    """
    grid, values = _parse(source)
    return ScalarField(grid, values)


def load_indicator_from_text(source: Union[IO, str]) -> IndicatorField:
    """Loads an indicator written by :meth:`IndicatorField.to_text`."""
    grid, values = _parse(source)
    if not np.all((values == 0) | (values == 1)):
        raise FieldError("Indicator files may only contain 0 and 1")
    return IndicatorField(grid, values == 1)
