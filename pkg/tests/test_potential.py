import math

from hypothesis import given
from hypothesis import strategies as st

from altphillips.potential import (
    ParameterRangeError,
    PotentialParams,
    e_to_j_scale,
    eval_W,
    eval_Wprime,
    mass_function,
    normalization_integral,
    phase_transform,
    potential_density,
    transform_field,
)
from tests.fixtures import *

gammas = st.floats(min_value=0.01, max_value=1.99)


def test_constants_at_gamma_one(params_1):
    assert params_1.c_gamma == pytest.approx(1.0 / 16.0)
    assert params_1.alpha == pytest.approx(2.0 / 3.0)
    assert params_1.c_star == pytest.approx((9.0 / 64.0) ** (1.0 / 3.0))
    assert params_1.c_star == pytest.approx(0.520021, abs=1e-6)
    assert params_1.beta == pytest.approx(0.5)


@pytest.mark.parametrize("gamma", [0.0, 2.0, -1.0, 2.5, math.nan, math.inf])
def test_make_params_rejects_gamma_out_of_range(gamma):
    with pytest.raises(ParameterRangeError):
        make_params(gamma)


def test_params_validate_gamma():
    with pytest.raises(ParameterRangeError):
        PotentialParams(gamma=2.0)


@pytest.mark.parametrize("gamma", [-2.0, 0.0, 2.0])
def test_params_reject_gamma_before_deriving_constants(gamma):
    with pytest.raises(ParameterRangeError):
        PotentialParams(gamma)


def test_params_derive_constants_from_gamma(params_1):
    assert PotentialParams(1.0) == params_1
    assert PotentialParams(1.9).c_star == make_params(1.9).c_star


def test_params_do_not_accept_derived_constants():
    with pytest.raises(TypeError):
        PotentialParams(gamma=1.0, c_gamma=0.5, alpha=0.5, c_star=1.0)


def test_params_to_dict(params_1):
    actual = params_1.to_dict()

    assert set(actual) == {"gamma", "c_gamma", "alpha", "c_star"}
    assert actual["gamma"] == 1.0


@pytest.mark.parametrize("gamma", [0.1, 0.5, 1.0, 1.5, 1.9, 1.99])
def test_normalization_integral_is_one(gamma):
    assert abs(normalization_integral(make_params(gamma)) - 1.0) <= 1e-10


def test_eval_W(params_1):
    assert eval_W(params_1, 0.0) == 0.0
    assert eval_W(params_1, 1.0) == pytest.approx(1.0 / 16.0)
    assert eval_W(params_1, 0.25) == pytest.approx(0.25)


def test_eval_W_rejects_negative_values(params_1):
    with pytest.raises(ParameterRangeError):
        eval_W(params_1, -1e-3)


def test_eval_Wprime(params_1):
    assert eval_Wprime(params_1, 1.0) == pytest.approx(-1.0 / 16.0)


@pytest.mark.parametrize("u", [0.0, -1.0])
def test_eval_Wprime_is_undefined_on_the_dead_set(params_1, u):
    with pytest.raises(ParameterRangeError):
        eval_Wprime(params_1, u)


def test_potential_density_vanishes_exactly_on_zero_entries(params_1):
    values = np.array([0.0, 0.25, 0.0, 1.0])

    actual = potential_density(params_1, values)

    assert actual[0] == 0.0 and actual[2] == 0.0
    np.testing.assert_allclose(actual[[1, 3]], [0.25, 1.0 / 16.0])


def test_potential_density_rejects_negative_entries(params_1):
    with pytest.raises(ParameterRangeError):
        potential_density(params_1, np.array([0.5, -0.1]))


@given(gamma=gammas, s=st.floats(min_value=1e-2, max_value=1e2))
def test_mass_function_is_antiderivative_of_twice_root_W(gamma, s):
    p = make_params(gamma)
    d = 1e-6 * s

    derivative = (mass_function(p, s + d) - mass_function(p, s - d)) / (2.0 * d)

    assert derivative == pytest.approx(2.0 * math.sqrt(eval_W(p, s)), rel=1e-6)


@given(gamma=gammas)
def test_mass_function_vanishes_at_zero_and_is_one_at_one(gamma):
    p = make_params(gamma)

    assert mass_function(p, 0.0) == 0.0
    assert mass_function(p, 1.0) == 1.0


@given(gamma=gammas, a=st.floats(min_value=0.0, max_value=10.0), b=st.floats(min_value=0.0, max_value=10.0))
def test_phase_transform_is_monotone(gamma, a, b):
    p = make_params(gamma)
    lo, hi = min(a, b), max(a, b)

    assert phase_transform(p, lo) <= phase_transform(p, hi)


@given(gamma=gammas, u=st.floats(min_value=0.0, max_value=10.0), lam=st.floats(min_value=0.1, max_value=10.0))
def test_phase_transform_is_homogeneous(gamma, u, lam):
    p = make_params(gamma)

    assert phase_transform(p, lam * u) == pytest.approx(lam ** p.beta * phase_transform(p, u), rel=1e-12, abs=1e-300)


def test_phase_transform_tends_to_indicator():
    values = np.array([0.0, 1e-3, 0.1, 1.0])

    actual = transform_field(make_params(1.999), values)

    assert actual[0] == 0.0
    np.testing.assert_allclose(actual[1:], 1.0, atol=5e-3)


def test_phase_transform_rejects_negative_values(params_1):
    with pytest.raises(ParameterRangeError):
        phase_transform(params_1, -0.5)
    with pytest.raises(ParameterRangeError):
        transform_field(params_1, np.array([-0.5]))


def test_e_to_j_scale(params_1):
    assert e_to_j_scale(params_1) == pytest.approx((1.0 / 16.0) ** (1.0 / 3.0))


@given(gamma=gammas)
def test_W_is_convex_and_decreasing(gamma):
    p = make_params(gamma)
    s = np.geomspace(1e-3, 1e3, 50)

    w = potential_density(p, s)

    assert np.all(np.diff(w) < 0)
    slopes = np.diff(w) / np.diff(s)
    assert np.all(np.diff(slopes) > 0)
