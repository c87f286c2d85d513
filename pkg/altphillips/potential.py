"""The negative-power potential W and the constants derived from the exponent gamma."""

import math
from typing import Union

import attr
import numpy as np
from scipy import integrate

ArrayLike = Union[float, np.ndarray]

# Width of the interval next to the singular endpoint that is integrated in closed form
_SINGULAR_EPS = 1e-6


@attr.s(auto_exc=True)
class ParameterRangeError(ValueError):
    """Raised when a parameter leaves the range in which a formula is defined."""

    #: str: Name of the offending parameter
    name: str = attr.ib()

    #: float: The rejected value
    value: float = attr.ib()

    #: str: Human readable description of the admissible range
    description: str = attr.ib(default="")

    def __str__(self) -> str:
        return f"Parameter [{self.name}] = [{self.value}] out of range: {self.description}"


def _checked_gamma(value) -> float:
    # Runs before the derived fields are computed from gamma
    value = float(value)
    if not 0.0 < value < 2.0:
        raise ParameterRangeError("gamma", value, "gamma must lie in (0, 2)")
    return value


@attr.s(slots=True, frozen=True)
class PotentialParams:
    """Exponent gamma of ``W(u) = c_gamma * u^(-gamma) * [u > 0]`` together with its derived constants.

    Only gamma is passed in, the derived fields are computed from it in closed form.
    """

    #: float: The exponent, in (0, 2)
    gamma: float = attr.ib(converter=_checked_gamma)

    #: float: Normalization constant (2 - gamma)^2 / 16
    c_gamma: float = attr.ib(init=False)

    #: float: Homogeneity of the one-dimensional solution, 2 / (2 + gamma)
    alpha: float = attr.ib(init=False)

    #: float: Prefactor of the one-dimensional solution c_star * t^alpha
    c_star: float = attr.ib(init=False)

    @c_gamma.default
    def _c_gamma_default(self) -> float:
        return (2.0 - self.gamma) ** 2 / 16.0

    @alpha.default
    def _alpha_default(self) -> float:
        return 2.0 / (2.0 + self.gamma)

    @c_star.default
    def _c_star_default(self) -> float:
        return ((1.0 + self.gamma / 2.0) ** 2 * self.c_gamma) ** (1.0 / (self.gamma + 2.0))

    @property
    def beta(self) -> float:
        """Exponent 1 - gamma/2 of the mass function and the phase transform."""
        return 1.0 - self.gamma / 2.0

    def to_dict(self) -> dict:
        return attr.asdict(self)


def make_params(gamma: float) -> PotentialParams:
    """Computes all constants that depend on `gamma`.

    Args:
        gamma: Exponent of the potential, strictly between 0 and 2

    Returns:
        The parameter set

    Raises:
        ParameterRangeError: If `gamma` is outside of (0, 2)
    """
    return PotentialParams(gamma)


def eval_W(p: PotentialParams, u: float) -> float:
    """Evaluates the potential at a single nonnegative value; the indicator makes W(0) = 0."""
    if u < 0:
        raise ParameterRangeError("u", u, "the potential is only defined for u >= 0")
    if u == 0:
        return 0.0
    return p.c_gamma * u ** (-p.gamma)


def eval_Wprime(p: PotentialParams, u: float) -> float:
    """Evaluates W'(u) = -gamma * c_gamma * u^(-gamma-1).

    The derivative is undefined on the dead set, callers have to branch on ``u == 0`` themselves.

    Raises:
        ParameterRangeError: If `u` is not strictly positive
    """
    if not u > 0:
        raise ParameterRangeError("u", u, "W' is only defined for u > 0")
    return -p.gamma * p.c_gamma * u ** (-p.gamma - 1.0)


def potential_density(p: PotentialParams, values: ArrayLike) -> np.ndarray:
    """Vectorized :func:`eval_W`, exactly zero on entries that are exactly zero."""
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise ParameterRangeError("u", float(values.min()), "the potential is only defined for u >= 0")

    result = np.zeros_like(values)
    alive = values > 0
    result[alive] = p.c_gamma * values[alive] ** (-p.gamma)
    return result


def mass_function(p: PotentialParams, s: ArrayLike) -> ArrayLike:
    """Antiderivative s^(1 - gamma/2) of 2 * sqrt(W), vanishing at 0.

    This is the one-dimensional energy of an optimal layer that rises from 0 to `s`.
    """
    return np.power(s, p.beta)


def normalization_integral(p: PotentialParams) -> float:
    """Integrates 2 * sqrt(W(s)) over [0, 1].

    The integrable singularity at 0 is integrated in closed form on [0, eps]; the remainder is handled by
    adaptive quadrature after the substitution s = exp(x), which turns the power law into a smooth exponential.
    The result equals 1 for every admissible gamma.
    """
    root_c = math.sqrt(p.c_gamma)
    head = 2.0 * root_c * _SINGULAR_EPS ** p.beta / p.beta

    def integrand(x: float) -> float:
        s = math.exp(x)
        return 2.0 * root_c * s ** (-p.gamma / 2.0) * s

    tail, _ = integrate.quad(integrand, math.log(_SINGULAR_EPS), 0.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return head + tail


def phase_transform(p: PotentialParams, u: float) -> float:
    """Maps u to u^(1 - gamma/2), which converges to the indicator of the positivity set as gamma -> 2."""
    if u < 0:
        raise ParameterRangeError("u", u, "the phase transform is only defined for u >= 0")
    return u ** p.beta


def transform_field(p: PotentialParams, values: ArrayLike) -> np.ndarray:
    """Vectorized :func:`phase_transform`."""
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise ParameterRangeError("u", float(values.min()), "the phase transform is only defined for u >= 0")
    return np.power(values, p.beta)


def e_to_j_scale(p: PotentialParams) -> float:
    """Factor c_gamma^(1/(gamma+2)) that maps minimizers of the unscaled energy to minimizers of J."""
    return p.c_gamma ** (1.0 / (p.gamma + 2.0))
