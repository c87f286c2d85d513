import csv
import io
import math

from scipy import integrate

from altphillips.potential import ParameterRangeError, mass_function, potential_density
from altphillips.profile import (
    CertificationError,
    ClosedForm,
    ConstructionError,
    GeneratorG,
    barrier_lemma1,
    barrier_lemma2,
    barrier_lemma4,
    correction_coefficient,
    correction_exponent,
    exact_phi,
    exact_phi_prime,
    expansion_ratios,
    leading_coefficient,
    ode_residual,
    profile_energy,
    profile_mass,
    profile_weight,
    psi_from_g,
    shifted_profile,
    smallest_passing_k,
    tabulate_generator,
)
from altphillips.util import least_squares_slope
from tests.fixtures import *


@pytest.fixture
def exact_profile(params_1):
    generator = tabulate_generator(params_1, ClosedForm("potential"), exact_phi(params_1, 1.0))
    return psi_from_g(generator, params_1)


# Exact solution


def test_exact_phi_at_zero_and_one(params_1):
    assert exact_phi(params_1, 0.0) == 0.0
    assert exact_phi(params_1, 1.0) == pytest.approx(0.520021, abs=1e-6)
    assert exact_phi(params_1, 1.0) ** params_1.beta == pytest.approx(0.721125, abs=1e-6)


def test_exact_phi_rejects_negative_t(params_1):
    with pytest.raises(ParameterRangeError):
        exact_phi(params_1, -1e-3)


def test_exact_phi_prime_is_singular_at_zero(params_1):
    with pytest.raises(ParameterRangeError):
        exact_phi_prime(params_1, 0.0)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5, 1.9])
def test_ode_residual_vanishes(gamma):
    p = make_params(gamma)
    ts = np.geomspace(1e-3, 1.0, 100)

    first, second = ode_residual(p, ts)

    assert np.abs(first).max() <= 1e-8
    scale = np.maximum(1.0, np.abs(2.0 * p.gamma * p.c_gamma * np.asarray(exact_phi(p, ts)) ** (-p.gamma - 1.0)))
    assert np.abs(second / scale).max() <= 1e-8


def test_equipartition_of_exact_solution(params_1):
    ts = np.linspace(0.01, 1.0, 50)

    kinetic = np.asarray(exact_phi_prime(params_1, ts)) ** 2
    potential = potential_density(params_1, exact_phi(params_1, ts))

    np.testing.assert_allclose(kinetic, potential, rtol=1e-12)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5])
def test_profile_energy_equals_profile_mass(gamma):
    p = make_params(gamma)

    assert profile_energy(p, 1.0) == pytest.approx(profile_mass(p, 0.0, 1.0), rel=1e-8)
    assert profile_energy(p, 0.3) == pytest.approx(exact_phi(p, 0.3) ** p.beta, rel=1e-8)


def test_profile_energy_scales_with_exponent_one_minus_alpha_gamma(params_1):
    radii = np.geomspace(1e-3, 1.0, 7)

    slope = least_squares_slope(np.log(radii), np.log([profile_energy(params_1, r) for r in radii]))

    assert abs(slope - (1.0 - params_1.alpha * params_1.gamma)) <= 1e-3


def test_profile_weight_integrates_to_mass(params_1):
    ts = np.linspace(0.1, 0.9, 20001)

    integral = integrate.trapezoid(profile_weight(params_1, ts), ts)

    assert integral == pytest.approx(profile_mass(params_1, 0.1, 0.9), rel=1e-6)


def test_profile_weight_concentrates_at_the_origin_as_gamma_tends_to_two():
    p = make_params(1.99)

    tail, _ = integrate.quad(lambda t: profile_weight(p, t), 0.1, 1.0)

    assert profile_mass(p, 0.0, 0.1) >= 0.9
    assert tail == pytest.approx(profile_mass(p, 0.1, 1.0), rel=1e-6)
    assert tail <= 0.1


def test_profile_mass_rejects_reversed_interval(params_1):
    with pytest.raises(ParameterRangeError):
        profile_mass(params_1, 0.5, 0.1)


def test_profile_energy_rejects_nonpositive_radius(params_1):
    with pytest.raises(ParameterRangeError):
        profile_energy(params_1, 0.0)


# Generators


def test_generator_rejects_unsorted_nodes():
    with pytest.raises(ValueError):
        GeneratorG(s_grid=[0.1, 0.3, 0.2], g_vals=[1.0, 1.0, 1.0])


def test_generator_rejects_mismatched_values():
    with pytest.raises(ValueError):
        GeneratorG(s_grid=[0.1, 0.2, 0.3], g_vals=[1.0, 1.0])


def test_closed_form_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ClosedForm("quadratic")


def test_closed_form_generators(params_1):
    s = np.array([0.1, 0.5, 1.0])
    w = potential_density(params_1, s)

    np.testing.assert_allclose(ClosedForm("potential").g(params_1, s), w)
    np.testing.assert_allclose(ClosedForm("shifted", {"eps_bar": 0.5}).g(params_1, s), w + 0.5)
    np.testing.assert_allclose(
        ClosedForm("growth", {"eps_bar": 0.0, "c1": 2.0}).g(params_1, s), w + 2.0 * s ** params_1.beta
    )


def test_closed_form_derivative_matches_difference_quotient(params_1):
    closed_form = ClosedForm("growth", {"eps_bar": 1e-3, "c1": 16.0})
    s = np.array([0.05, 0.2, 0.7])
    d = 1e-7

    quotient = (closed_form.g(params_1, s + d) - closed_form.g(params_1, s - d)) / (2.0 * d)

    np.testing.assert_allclose(closed_form.g_prime(params_1, s), quotient, rtol=1e-6)


# Order reduction


def test_psi_from_g_reproduces_phi(params_1, exact_profile):
    deviation = np.abs(exact_profile.vals - np.asarray(exact_phi(params_1, exact_profile.ts)))

    assert deviation.max() <= 1e-6
    assert exact_profile.ts[-1] == pytest.approx(1.0, rel=1e-6)


def test_psi_from_g_is_monotone(exact_profile):
    assert exact_profile.vals[0] == 0.0
    assert np.all(np.diff(exact_profile.vals) >= 0)


def test_profile_evaluates_between_grid_points(params_1, exact_profile):
    assert exact_profile.psi(0.123456) == pytest.approx(exact_phi(params_1, 0.123456), rel=1e-6)
    assert exact_profile.arrival_time(exact_phi(params_1, 0.5)) == pytest.approx(0.5, rel=1e-6)


def test_profile_evaluates_up_to_its_end(exact_profile):
    assert exact_profile.psi(exact_profile.ts[-1]) == pytest.approx(exact_profile.vals[-1], rel=1e-9)


@pytest.mark.parametrize("t", [-0.1, 1.5, [0.5, 2.0]])
def test_profile_rejects_abscissas_outside_its_interval(exact_profile, t):
    with pytest.raises(ParameterRangeError):
        exact_profile.psi(t)


def test_growth_barrier_is_not_extrapolated_past_t0(params_1):
    profile = barrier_lemma1(params_1, n_points=2001)

    with pytest.raises(ParameterRangeError):
        profile.psi(2.0 * profile.t_knots["t0"])


def test_psi_from_g_stalls_where_g_vanishes(params_1):
    generator = GeneratorG(s_grid=[0.1, 0.2, 0.3, 0.4], g_vals=[1.0, 0.0, 1.0, 1.0])

    with pytest.raises(ConstructionError) as excinfo:
        psi_from_g(generator, params_1)

    assert excinfo.value.index == 1


def test_profile_to_csv(exact_profile):
    actual = exact_profile.to_csv()

    rows = list(csv.reader(io.StringIO(actual)))
    assert rows[0] == ["t", "psi", "psi_prime", "margin"]
    assert len(rows) == len(exact_profile.ts) + 1
    assert float(rows[1][0]) == 0.0


def test_profile_to_csv_writes_file(exact_profile, tmp_path):
    path = tmp_path / "profile.csv"

    exact_profile.to_csv(path)

    assert path.read_text(encoding="utf-8") == exact_profile.to_csv()


def test_profile_to_csv_rejects_other_sinks(exact_profile):
    with pytest.raises(TypeError):
        exact_profile.to_csv(42)


# Barriers


@pytest.mark.parametrize("gamma", [1.8, 1.9, 1.95])
def test_growth_barrier_certifies(gamma):
    profile = barrier_lemma1(make_params(gamma))

    assert profile.certificate.passed
    checked = profile.margins[np.isfinite(profile.margins)]
    assert len(checked) > 0 and checked.min() >= 0
    assert profile.vals[-1] == pytest.approx(profile.s_knots["s0"])
    assert profile.vals[-1] <= 1.0


def test_growth_barrier_knots(params_19):
    profile = barrier_lemma1(params_19, n=2)

    s0 = profile.s_knots["s0"]
    assert 16.0 * s0 ** params_19.beta == pytest.approx(params_19.c_gamma * s0 ** -params_19.gamma, rel=1e-9)
    assert profile.t_knots["t0"] == profile.ts[-1]


def test_growth_barrier_rejects_nonpositive_eps_bar(params_19):
    with pytest.raises(ParameterRangeError):
        barrier_lemma1(params_19, eps_bar=0.0)


def test_growth_barrier_s0_decreases_as_gamma_tends_to_two():
    actual = [barrier_lemma1(make_params(gamma), n_points=2001).s_knots["s0"] for gamma in (1.8, 1.9, 1.95)]

    assert actual[0] > actual[1] > actual[2] > 0


# Expansion at the free boundary


@pytest.mark.parametrize("gamma", [1.0, 1.5, 1.9])
def test_shifted_profile_expansion_stabilizes_at_leading_coefficient(gamma):
    p = make_params(gamma)

    report = expansion_ratios(shifted_profile(p, eps_bar=1e-4), [1e-3, 1e-4, 1e-5])

    assert report.leading == leading_coefficient(p, 1e-4)
    assert report.ratios == pytest.approx(np.full(3, report.leading), rel=0.1)
    assert report.spread <= 0.1
    np.testing.assert_array_equal(report.predicted, report.leading)


@pytest.mark.parametrize("gamma", [1.0, 1.5, 1.9])
def test_growth_barrier_expansion_follows_two_term_prediction(gamma):
    p = make_params(gamma)
    profile = barrier_lemma1(p, eps_bar=1e-4)

    report = expansion_ratios(profile, [1e-4, 1e-5])

    assert report.ratios == pytest.approx(report.predicted, rel=0.1)
    assert np.all(report.ratios > 1000 * report.leading)


def test_growth_barrier_expansion_trails_with_correction_exponent(params_1):
    profile = barrier_lemma1(params_1, eps_bar=1e-4)

    report = expansion_ratios(profile, [1e-4, 1e-5])

    assert report.next_order_exponent == pytest.approx(correction_exponent(params_1), abs=0.02)
    assert correction_coefficient(params_1, 16.0) * 1e-1 == pytest.approx(0.83, abs=0.01)


def test_expansion_rejects_abscissas_beyond_the_profile(params_19):
    profile = barrier_lemma1(params_19, eps_bar=1e-4)

    assert profile.ts[-1] < 1e-3
    with pytest.raises(ParameterRangeError):
        expansion_ratios(profile, [1e-3, 1e-4, 1e-5])


def test_expansion_needs_a_shifted_or_growth_generator(exact_profile):
    with pytest.raises(ValueError):
        expansion_ratios(exact_profile, [1e-3])


def test_shifted_profile_rejects_nonpositive_eps_bar(params_1):
    with pytest.raises(ParameterRangeError):
        shifted_profile(params_1, eps_bar=0.0)


@pytest.mark.parametrize("gamma", [1.0, 1.5])
def test_inner_density_barrier_certifies(gamma):
    p = make_params(gamma)

    profile = barrier_lemma2(p)

    assert profile.certificate.passed
    assert profile.certificate.get("psi(1) >= 2 C0").margin >= 0
    assert profile.ts[-1] == pytest.approx(1.0)
    assert potential_density(p, profile.s_knots["s0"]) == pytest.approx(1.0)


def test_inner_density_barrier_without_correction_fails(params_1):
    with pytest.raises(CertificationError) as excinfo:
        barrier_lemma2(params_1, K=0.0, n_points=2001)

    assert excinfo.value.margin < 0


def test_smallest_passing_k_is_a_power_of_two(params_1):
    K = smallest_passing_k(params_1)

    assert math.log2(K) == int(math.log2(K))


@pytest.mark.parametrize("gamma, M", [(1.9, 1.0), (1.95, 2.0), (1.99, 4.0), (1.995, 4.0)])
def test_outer_density_barrier_certifies(gamma, M):
    profile = barrier_lemma4(make_params(gamma), n=1, M=M)

    assert profile.certificate.passed
    knots = profile.s_knots
    assert knots["s1"] <= knots["s0"] <= knots["sigma"] <= knots["s2"]
    assert profile.t_knots["t_sigma"] <= 0.25
    assert np.all(profile.vals[profile.ts >= 0.25] == knots["sigma"])


@pytest.mark.parametrize("M", [1.0, 2.0, 4.0])
def test_outer_density_barrier_far_from_two_cannot_cross_zero(M):
    with pytest.raises(ConstructionError):
        barrier_lemma4(make_params(1.8), n=1, M=M)


def test_outer_density_barrier_rejects_large_n_and_M():
    with pytest.raises(ParameterRangeError):
        barrier_lemma4(make_params(1.95), n=2, M=100.0)


def test_outer_density_barrier_rejects_small_M(params_19):
    with pytest.raises(ParameterRangeError):
        barrier_lemma4(params_19, M=0.5)


def test_certificate_to_dict(params_19):
    profile = barrier_lemma1(params_19, n_points=2001)

    actual = profile.certificate.to_dict()

    assert set(actual) == {c.name for c in profile.certificate.checks}
    assert all(entry["passed"] for entry in actual.values())
    with pytest.raises(KeyError):
        profile.certificate.get("no such check")


def test_mass_function_matches_profile_mass(params_1):
    assert profile_mass(params_1, 0.0, 1.0) == pytest.approx(mass_function(params_1, exact_phi(params_1, 1.0)))
