from altphillips.field import (
    FieldError,
    annulus_mask,
    ball_mask,
    boundary_cells,
    distance_transform,
    field_gap_norms,
    gap_norms,
    hausdorff_distance,
    interface_band,
    outer_layer,
    positivity_set,
    rescale,
)
from altphillips.profile import exact_phi
from tests.fixtures import *

# Grids


def test_grid_box(square_grid):
    assert square_grid.dim == 2
    assert square_grid.h == pytest.approx(1.0 / 64.0)
    assert square_grid.shape == (65, 65)
    assert square_grid.size == 65 * 65
    assert square_grid.cell_volume == pytest.approx(1.0 / 64.0 ** 2)
    assert square_grid.extent == pytest.approx((1.0, 1.0))


def test_grid_box_rejects_unequal_spacing():
    with pytest.raises(FieldError):
        Grid.box((1.0, 1.0), (64, 32))


def test_grid_rejects_mismatched_origin():
    with pytest.raises(FieldError):
        Grid(dim=2, origin=(0.0,), n_cells=(4, 4), h=0.25)


def test_grid_rejects_nonpositive_spacing():
    with pytest.raises(FieldError):
        Grid(dim=1, origin=(0.0,), n_cells=(4,), h=0.0)


def test_rectangular_grid():
    grid = Grid.box((1.0, 0.5), (256, 128))

    assert grid.shape == (257, 129)
    assert grid.h == pytest.approx(1.0 / 256.0)


def test_coordinates_use_matrix_indexing():
    grid = Grid.box((1.5, 1.0), (3, 2))

    coordinates = grid.coordinates()

    assert coordinates.shape == (4, 3, 2)
    np.testing.assert_allclose(coordinates[2, 1], [1.0, 0.5])
    np.testing.assert_allclose(grid.position((2, 1)), [1.0, 0.5])


def test_nearest_node_is_clipped(square_grid):
    assert square_grid.nearest_node((0.5, 0.25)) == (32, 16)
    assert square_grid.nearest_node((-1.0, 2.0)) == (0, 64)


def test_outer_layer(square_grid, line_grid):
    assert np.count_nonzero(outer_layer(square_grid)) == 65 ** 2 - 63 ** 2
    mask = outer_layer(line_grid)
    assert mask[0] and mask[-1] and np.count_nonzero(mask) == 2


# Field types


def test_scalar_field_rejects_negative_values(line_grid):
    with pytest.raises(FieldError):
        ScalarField(line_grid, np.full(line_grid.shape, -1.0))


def test_scalar_field_rejects_wrong_shape(line_grid):
    with pytest.raises(FieldError):
        ScalarField(line_grid, np.zeros(7))


def test_scalar_field_defaults_to_outer_layer(square_grid):
    u = ScalarField(square_grid, np.zeros(square_grid.shape))

    np.testing.assert_array_equal(u.boundary_mask, outer_layer(square_grid))


def test_indicator_set_operations(halfplane_dead):
    complement = halfplane_dead.complement()

    assert halfplane_dead.count + complement.count == halfplane_dead.grid.size
    assert halfplane_dead.intersection(complement).is_empty()
    assert halfplane_dead.volume() == pytest.approx(33 * 65 / 64.0 ** 2)


# Text format


@pytest.mark.parametrize(
    "path, text",
    [
        (pytest.lazy_fixture("small_2d_field_path"), pytest.lazy_fixture("small_2d_field_text")),
        (pytest.lazy_fixture("small_1d_field_path"), pytest.lazy_fixture("small_1d_field_text")),
    ],
)
def test_field_text_round_trip(path, text):
    with open(path, "r") as f:
        u = load_field_from_text(f)

    assert u.to_text() == text


def test_load_field_from_text(small_2d_field_text):
    u = load_field_from_text(small_2d_field_text)

    assert u.grid == Grid.box((1.5, 1.0), (3, 2))
    assert u.values[3, 2] == 1.5
    assert u.values[1, 1] == 0.25


def test_field_to_text_writes_file(small_2d_field_text, tmp_path):
    u = load_field_from_text(small_2d_field_text)
    path = tmp_path / "field.txt"

    u.to_text(path)

    assert path.read_text(encoding="utf-8") == small_2d_field_text


def test_field_to_text_rejects_other_sinks(small_2d_field_text):
    with pytest.raises(TypeError):
        load_field_from_text(small_2d_field_text).to_text(3)


def test_load_field_rejects_malformed_header(malformed_field_path):
    with open(malformed_field_path, "r") as f:
        with pytest.raises(FieldError):
            load_field_from_text(f)


def test_load_field_rejects_missing_values():
    with pytest.raises(FieldError):
        load_field_from_text("1 4 0.25 0.0\n0.0\n0.1\n")


def test_load_field_rejects_empty_text():
    with pytest.raises(FieldError):
        load_field_from_text("")


def test_indicator_text_round_trip(halfplane_dead):
    actual = load_indicator_from_text(halfplane_dead.to_text())

    np.testing.assert_array_equal(actual.member, halfplane_dead.member)


def test_load_indicator_rejects_fractional_values(small_2d_field_text):
    with pytest.raises(FieldError):
        load_indicator_from_text(small_2d_field_text)


# Sets and distances


def test_ball_mask_in_one_dimension(line_grid):
    ball = ball_mask(line_grid, (0.5,), 0.1)

    assert ball.count == 21


def test_ball_mask_area_approximates_disc():
    grid = Grid.box((1.0, 1.0), (256, 256))

    ball = ball_mask(grid, (0.5, 0.5), 0.25)

    assert ball.count * grid.h ** 2 == pytest.approx(np.pi / 16.0, rel=0.02)


def test_ball_mask_below_half_spacing_holds_only_its_center(square_grid):
    ball = ball_mask(square_grid, (0.5, 0.5), 0.4 * square_grid.h)

    assert ball.count == 1
    assert ball.member[32, 32]


def test_boundary_cells_of_disc_follow_the_circle(square_grid):
    radius = 0.25
    disc = ball_mask(square_grid, (0.5, 0.5), radius)

    cells = boundary_cells(disc)

    perimeter_nodes = 2.0 * np.pi * radius / square_grid.h
    assert perimeter_nodes <= len(cells) <= 3.0 * perimeter_nodes
    offsets = np.abs(np.linalg.norm(cells - 0.5, axis=1) - radius)
    assert offsets.max() <= square_grid.h * (1.0 + 1e-9)


def test_ball_mask_rejects_nonpositive_radius(square_grid):
    with pytest.raises(FieldError):
        ball_mask(square_grid, (0.5, 0.5), 0.0)


def test_annulus_excludes_inner_ball(square_grid):
    annulus = annulus_mask(square_grid, (0.5, 0.5), 0.1, 0.2)
    inner = ball_mask(square_grid, (0.5, 0.5), 0.1)
    outer = ball_mask(square_grid, (0.5, 0.5), 0.2)

    assert annulus.count == outer.count - inner.count
    assert annulus.intersection(inner).is_empty()


def test_distance_transform_of_halfplane(halfplane_dead):
    x1 = halfplane_dead.grid.coordinates()[..., 0]

    dist = distance_transform(halfplane_dead)

    np.testing.assert_allclose(dist.dist, np.maximum(x1 - 0.5, 0.0), atol=1e-12)


def test_distance_transform_methods_agree(square_grid):
    rng = np.random.default_rng(1234)
    source = IndicatorField(square_grid, rng.random(square_grid.shape) < 0.01)

    brute = distance_transform(source, method="brute")
    edt = distance_transform(source, method="edt")

    np.testing.assert_allclose(brute.dist, edt.dist, atol=1e-12)


def test_distance_transform_of_single_node(square_grid):
    member = np.zeros(square_grid.shape, dtype=bool)
    member[32, 32] = True

    dist = distance_transform(IndicatorField(square_grid, member))

    assert dist.dist[32, 32] == 0.0
    assert dist.dist[35, 36] == pytest.approx(5.0 / 64.0)


@pytest.mark.parametrize("method", ["brute", "edt"])
def test_distance_transform_is_one_lipschitz_between_neighbours(square_grid, method):
    rng = np.random.default_rng(99)
    source = IndicatorField(square_grid, rng.random(square_grid.shape) < 0.005)

    dist = distance_transform(source, method=method).dist

    for axis in range(square_grid.dim):
        assert np.abs(np.diff(dist, axis=axis)).max() <= square_grid.h + 1e-12


def test_distance_transform_rejects_empty_set(square_grid):
    with pytest.raises(FieldError):
        distance_transform(IndicatorField(square_grid, np.zeros(square_grid.shape, dtype=bool)))


def test_distance_transform_rejects_unknown_method(halfplane_dead):
    with pytest.raises(FieldError):
        distance_transform(halfplane_dead, method="fast-marching")


def test_positivity_set_and_interface(halfplane_field):
    positive = positivity_set(halfplane_field)

    cells = boundary_cells(positive)

    assert positive.count == 32 * 65
    assert set(np.round(cells[:, 0] * 64).astype(int)) == {32, 33}
    assert np.count_nonzero(interface_band(positive)) == 2 * 65


def test_positivity_tolerance_moves_the_interface_by_at_most_two_cells(halfplane_field, params_1):
    h = halfplane_field.grid.h

    literal = boundary_cells(positivity_set(halfplane_field))
    tolerant = boundary_cells(positivity_set(halfplane_field, dead_tol=float(exact_phi(params_1, h))))

    assert hausdorff_distance(literal, tolerant) <= 2.0 * h


def test_positivity_set_rejects_negative_tolerance(halfplane_field):
    with pytest.raises(FieldError):
        positivity_set(halfplane_field, dead_tol=-1.0)


def test_rescale_reproduces_homogeneous_solution(halfplane_field, params_1):
    target = Grid.box((0.5, 0.5), (16, 16))
    x1 = target.coordinates()[..., 0]

    rescaled = rescale(halfplane_field, params_1, (0.5, 0.25), 0.5, target)

    np.testing.assert_allclose(rescaled.values, exact_phi(params_1, x1), rtol=1e-9, atol=1e-12)


def test_rescale_composes_multiplicatively(square_grid, params_1):
    x1 = square_grid.coordinates()[..., 0]
    kinked = ScalarField(square_grid, np.maximum(x1 - 0.5, 0.0))

    composed = rescale(rescale(kinked, params_1, (0.5, 0.25), 0.5), params_1, (0.0, 0.0), 0.5)
    direct = rescale(kinked, params_1, (0.5, 0.25), 0.25)

    np.testing.assert_allclose(composed.values, direct.values, atol=1e-12)


def test_rescale_composition_keeps_the_interface(halfplane_field, params_1):
    h = halfplane_field.grid.h

    composed = rescale(rescale(halfplane_field, params_1, (0.5, 0.25), 0.5), params_1, (0.0, 0.0), 0.5)
    direct = rescale(halfplane_field, params_1, (0.5, 0.25), 0.25)

    gap = hausdorff_distance(boundary_cells(positivity_set(composed)), boundary_cells(positivity_set(direct)))
    assert gap <= 2.0 * h


def test_rescale_rejects_sampling_outside_the_box(halfplane_field, params_1):
    with pytest.raises(FieldError):
        rescale(halfplane_field, params_1, (0.5, 0.5), 2.0)


def test_hausdorff_distance_of_singletons():
    assert hausdorff_distance(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == pytest.approx(5.0)


def test_hausdorff_distance_is_symmetric():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([[0.0, 0.0]])

    assert hausdorff_distance(a, b) == hausdorff_distance(b, a) == pytest.approx(1.0)


def test_hausdorff_distance_of_parallel_lines():
    h = 0.01
    x = np.linspace(0.0, 1.0, 101)
    lower = np.stack([x, np.zeros_like(x)], axis=1)
    upper = np.stack([x + h / 2.0, np.full_like(x, 0.3)], axis=1)

    assert hausdorff_distance(lower, upper) == pytest.approx(0.3, abs=h)


def test_hausdorff_distance_rejects_empty_sets():
    with pytest.raises(FieldError):
        hausdorff_distance(np.zeros((0, 2)), np.array([[0.0, 0.0]]))


def test_gap_norms(line_grid):
    l1, l2 = gap_norms(line_grid, np.ones(line_grid.shape), np.zeros(line_grid.shape))

    assert l1 == pytest.approx(1.01)
    assert l2 == pytest.approx(np.sqrt(1.01))


def test_field_gap_norms_need_equal_grids(line_grid, square_grid):
    with pytest.raises(FieldError):
        field_gap_norms(
            ScalarField(line_grid, np.zeros(line_grid.shape)), ScalarField(square_grid, np.zeros(square_grid.shape))
        )
