"""One-dimensional profiles.

This module holds the exact homogeneous solution ``phi(t) = c_star * t^alpha``, the order reduction that recovers
a monotone profile psi from a prescribed ``g(psi) = (psi')^2`` and the three barrier profiles built from it:

* :func:`barrier_lemma1`, the growth barrier, a subsolution of ``2 psi'' >= 4 n psi' + W'(psi)`` near the free
  boundary;
* :func:`barrier_lemma2`, the inner density barrier, a supersolution of ``2 psi'' + 4 n psi' <= W'(psi)`` that
  reaches a prescribed height at t = 1;
* :func:`barrier_lemma4`, the outer density barrier, whose slope is pinched between ``W(psi)/2`` and ``W(psi)`` and
  which is constant outside an interval of length 1/4.

Every barrier is certified on its sampling grid and carries the resulting :class:`Certificate`.
"""

import logging
import math
from typing import Dict, Optional, Sequence, Tuple, Union

import attr
import numpy as np
from attr import validators
from scipy import integrate, optimize

from altphillips.potential import ParameterRangeError, PotentialParams, potential_density
from altphillips.util import PathLike, rows_to_csv, serialize_text

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

#: Relative size of the interval [0, eps * s_end] on which G is integrated in closed form
HEAD_EPS = 1e-8

#: Default number of s-nodes used to tabulate a generator
GENERATOR_SIZE = 20001

#: Default number of t-nodes of a profile, i.e. a relative resolution of 1e-4
PROFILE_SIZE = 10001

_CLOSED_FORM_KINDS = ("potential", "shifted", "growth", "outer")


@attr.s(auto_exc=True)
class ConstructionError(ValueError):
    """Raised when a profile cannot be built from its generator."""

    #: str: What went wrong
    description: str = attr.ib()

    #: int: Index of the offending generator node, if there is one
    index: Optional[int] = attr.ib(default=None)

    def __str__(self) -> str:
        if self.index is None:
            return self.description
        return f"{self.description} (generator node [{self.index}])"


@attr.s(auto_exc=True)
class CertificationError(ArithmeticError):
    """Raised when a barrier profile violates one of its defining inequalities on the grid."""

    #: str: Name of the failed check
    check: str = attr.ib()

    #: int: First grid index at which the check fails
    index: int = attr.ib()

    #: float: Abscissa of that grid point
    t: float = attr.ib()

    #: float: The (negative) margin at that point
    margin: float = attr.ib()

    def __str__(self) -> str:
        return f"Check [{self.check}] fails first at index [{self.index}], t = [{self.t}], margin [{self.margin}]"


def _as_float_array(values) -> np.ndarray:
    return np.array(values, dtype=float)


def _scalar_or_array(values: np.ndarray) -> ArrayLike:
    return values if values.ndim else float(values)


# Exact solution


def exact_phi(p: PotentialParams, t: ArrayLike) -> ArrayLike:
    """Evaluates the one-dimensional solution ``c_star * t^alpha`` for t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterRangeError("t", float(t.min()), "phi is evaluated on t >= 0, use the positive part")
    return _scalar_or_array(p.c_star * t ** p.alpha)


def exact_phi_prime(p: PotentialParams, t: ArrayLike) -> ArrayLike:
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ParameterRangeError("t", float(t.min()), "phi' is singular at t = 0")
    return _scalar_or_array(p.c_star * p.alpha * t ** (p.alpha - 1.0))


def _phi_second(p: PotentialParams, t: np.ndarray) -> np.ndarray:
    return p.c_star * p.alpha * (p.alpha - 1.0) * t ** (p.alpha - 2.0)


def _w_prime(p: PotentialParams, s: np.ndarray) -> np.ndarray:
    return -p.gamma * p.c_gamma * s ** (-p.gamma - 1.0)


def ode_residual(p: PotentialParams, ts: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Residuals of the first order equation ``phi' = sqrt(W(phi))`` and of ``2 phi'' = W'(phi)``.

    Args:
        p: The potential
        ts: Strictly positive abscissas

    Returns:
        Both residuals, pointwise
    """
    ts = np.asarray(ts, dtype=float)
    phi = np.asarray(exact_phi(p, ts))
    first = np.asarray(exact_phi_prime(p, ts)) - np.sqrt(potential_density(p, phi))
    second = 2.0 * _phi_second(p, ts) - _w_prime(p, phi)
    return first, second


def profile_weight(p: PotentialParams, t: ArrayLike) -> ArrayLike:
    """One-dimensional energy density ``2 sqrt(W(phi(t))) phi'(t)`` of the exact solution.

    Its integral over (0, A) is ``phi(A)^(1 - gamma/2)``; as gamma -> 2 it concentrates at the origin.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ParameterRangeError("t", float(t.min()), "the profile weight is defined for t > 0")
    phi = np.asarray(exact_phi(p, t))
    return _scalar_or_array(2.0 * np.sqrt(potential_density(p, phi)) * np.asarray(exact_phi_prime(p, t)))


def profile_mass(p: PotentialParams, a: float, b: float) -> float:
    """Closed-form integral of :func:`profile_weight` over [a, b]."""
    if not 0 <= a <= b:
        raise ParameterRangeError("a", a, f"need 0 <= a <= b, got b = {b}")
    beta = p.beta
    return exact_phi(p, b) ** beta - exact_phi(p, a) ** beta


def profile_energy(p: PotentialParams, r: float) -> float:
    """Integrates ``(phi')^2 + W(phi)`` over (0, r) by adaptive quadrature.

    The head [0, 1e-12 r] is integrated in closed form; on the rest the substitution t = exp(x) turns the power-law
    singularity into a smooth integrand.
    """
    if r <= 0:
        raise ParameterRangeError("r", r, "the radius must be positive")

    eps = 1e-12 * r
    power = 2.0 * p.alpha - 1.0
    head = 2.0 * (p.c_star * p.alpha) ** 2 * eps ** power / power

    def integrand(x: float) -> float:
        t = math.exp(x)
        phi = p.c_star * t ** p.alpha
        slope = p.c_star * p.alpha * t ** (p.alpha - 1.0)
        return (slope * slope + p.c_gamma * phi ** (-p.gamma)) * t

    tail, _ = integrate.quad(integrand, math.log(eps), math.log(r), epsabs=1e-14, epsrel=1e-12, limit=200)
    return head + tail


# Generators


@attr.s(slots=True, frozen=True)
class ClosedForm:
    """Tag identifying one of the explicit generators together with its parameters.

    ``potential``
        g = W
    ``shifted``
        g = W + eps_bar
    ``growth``
        g = W + eps_bar + c1 * s^(1 - gamma/2)
    ``outer``
        g = W + (-1/2 + cn * (s^(1 - gamma/2) - s1^(1 - gamma/2))) for s > s1, g = W up to s1
    """

    #: str: Which formula
    kind: str = attr.ib(validator=validators.in_(_CLOSED_FORM_KINDS))

    #: Dict[str, float]: Its parameters
    params: Dict[str, float] = attr.ib(factory=dict, converter=dict, eq=False)

    def g(self, p: PotentialParams, s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        w = potential_density(p, s)
        if self.kind == "potential":
            return w
        if self.kind == "shifted":
            return w + self.params["eps_bar"]
        if self.kind == "growth":
            return w + self.params["eps_bar"] + self.params["c1"] * s ** p.beta
        s1 = self.params["s1"]
        return w + np.where(s > s1, -0.5 + self.params["cn"] * (s ** p.beta - s1 ** p.beta), 0.0)

    def g_prime(self, p: PotentialParams, s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        w_prime = _w_prime(p, s)
        if self.kind in ("potential", "shifted"):
            return w_prime
        if self.kind == "growth":
            return w_prime + self.params["c1"] * p.beta * s ** (-p.gamma / 2.0)
        return w_prime + np.where(s > self.params["s1"], self.params["cn"] * p.beta * s ** (-p.gamma / 2.0), 0.0)


@attr.s(slots=True, frozen=True)
class GeneratorG:
    """Tabulated ``g(s) = (psi')^2`` as a function of the profile value s."""

    #: np.ndarray: Strictly increasing, strictly positive s-nodes
    s_grid: np.ndarray = attr.ib(converter=_as_float_array, eq=False)

    #: np.ndarray: g at the nodes
    g_vals: np.ndarray = attr.ib(converter=_as_float_array, eq=False)

    #: ClosedForm: The formula the table was sampled from, if any
    closed_form: Optional[ClosedForm] = attr.ib(
        default=None, validator=validators.optional(validators.instance_of(ClosedForm))
    )

    @s_grid.validator
    def _check_s_grid(self, attribute, value):
        if value.ndim != 1 or len(value) < 2:
            raise ValueError("A generator needs at least two nodes")
        if value[0] <= 0 or np.any(np.diff(value) <= 0):
            raise ValueError("Generator nodes must be strictly positive and strictly increasing")

    @g_vals.validator
    def _check_g_vals(self, attribute, value):
        if value.shape != self.s_grid.shape:
            raise ValueError(f"Expected {self.s_grid.shape} generator values, got {value.shape}")

    def evaluate(self, p: PotentialParams, s: ArrayLike) -> np.ndarray:
        """g at arbitrary s, exact if a closed form is known, else linearly interpolated."""
        if self.closed_form is not None:
            return self.closed_form.g(p, s)
        return np.interp(s, self.s_grid, self.g_vals)


def tabulate_generator(
    p: PotentialParams, closed_form: ClosedForm, s_end: float, size: int = GENERATOR_SIZE
) -> GeneratorG:
    """Samples `closed_form` on geometrically spaced nodes in [HEAD_EPS * s_end, s_end]."""
    s_grid = np.geomspace(HEAD_EPS * s_end, s_end, size)
    return GeneratorG(s_grid=s_grid, g_vals=closed_form.g(p, s_grid), closed_form=closed_form)


# Profiles


@attr.s(slots=True, frozen=True)
class CheckResult:
    #: str: Name of the property
    name: str = attr.ib()

    #: float: Smallest margin over the points the property is checked on
    margin: float = attr.ib()

    #: int: First violating grid index, `None` if the property holds
    index: Optional[int] = attr.ib(default=None)

    #: float: Abscissa of the first violation
    t: Optional[float] = attr.ib(default=None)

    @property
    def passed(self) -> bool:
        return self.index is None


@attr.s(slots=True, frozen=True)
class Certificate:
    """Outcome of certifying a profile on its grid."""

    checks: Tuple[CheckResult, ...] = attr.ib(converter=tuple)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def get(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(f"No check named [{name}]")

    def to_dict(self) -> dict:
        return {
            check.name: {"margin": check.margin, "passed": check.passed, "index": check.index, "t": check.t}
            for check in self.checks
        }


@attr.s(slots=True, frozen=True)
class Profile1D:
    """A sampled monotone profile psi together with its slope and the distinguished knots of its construction."""

    #: np.ndarray: Strictly increasing abscissas
    ts: np.ndarray = attr.ib(converter=_as_float_array, eq=False)

    #: np.ndarray: Nondecreasing profile values
    vals: np.ndarray = attr.ib(converter=_as_float_array, eq=False)

    #: PotentialParams: The potential the profile belongs to
    params: PotentialParams = attr.ib(validator=validators.instance_of(PotentialParams))

    #: np.ndarray: psi' at the abscissas
    slopes: np.ndarray = attr.ib(converter=_as_float_array, eq=False)

    #: Dict[str, float]: Distinguished abscissas such as t0 or t1
    t_knots: Dict[str, float] = attr.ib(factory=dict, eq=False)

    #: Dict[str, float]: Distinguished ordinates such as s0, s1, s2 or sigma
    s_knots: Dict[str, float] = attr.ib(factory=dict, eq=False)

    #: np.ndarray: Residual of the defining inequality per grid point, NaN where it is not checked
    margins: Optional[np.ndarray] = attr.ib(default=None, eq=False)

    #: Certificate: Result of the certification, if the profile is a barrier
    certificate: Optional[Certificate] = attr.ib(default=None, eq=False)

    #: Tuple[np.ndarray, np.ndarray]: Tabulated (G, s) pairs for evaluating psi between grid points
    inverse: Optional[Tuple[np.ndarray, np.ndarray]] = attr.ib(default=None, eq=False, repr=False)

    #: ClosedForm: The explicit generator the profile was built from, if any
    generator: Optional[ClosedForm] = attr.ib(default=None, eq=False)

    @ts.validator
    def _check_ts(self, attribute, value):
        if value.ndim != 1 or len(value) < 2:
            raise ValueError("A profile needs at least two abscissas")
        if np.any(np.diff(value) <= 0):
            raise ValueError("Profile abscissas must be strictly increasing")

    @vals.validator
    def _check_vals(self, attribute, value):
        if value.shape != self.ts.shape:
            raise ValueError(f"Expected {self.ts.shape} profile values, got {value.shape}")
        if np.any(value < 0) or np.any(np.diff(value) < 0):
            raise ValueError("Profile values must be nonnegative and nondecreasing")

    def psi(self, t: ArrayLike) -> ArrayLike:
        """Evaluates psi off the grid by inverting the tabulated G.

        Only available for profiles built by :func:`psi_from_g`.

        Raises:
            ParameterRangeError: If an abscissa lies outside [0, G(s_end)], where the profile is not defined
        """
        if self.inverse is None:
            raise ValueError("This profile has no inverse table")
        G_tab, s_tab = self.inverse
        t = np.asarray(t, dtype=float)
        outside = (t < 0) | (t > G_tab[-1])
        if np.any(outside):
            raise ParameterRangeError(
                "t", float(t[outside].flat[0]), f"the profile is defined on [0, {G_tab[-1]}] only"
            )
        return _scalar_or_array(_invert_g(self.params, G_tab, s_tab, t))

    def arrival_time(self, s: float) -> float:
        """The abscissa G(s) at which psi reaches the value `s`."""
        if self.inverse is None:
            raise ValueError("This profile has no inverse table")
        G_tab, s_tab = self.inverse
        if s <= s_tab[0]:
            return _head_g(self.params, s)
        return float(np.exp(np.interp(math.log(s), np.log(s_tab), np.log(G_tab))))

    def to_csv(self, path: PathLike = None) -> Optional[str]:
        """Exports the profile with columns t, psi, psi_prime and margin.

        Args:
            path: File path, if `None` is provided the CSV is returned as a string

        Returns:
            If `path` is None, then the CSV representation is returned as a string
        """
        margins = self.margins if self.margins is not None else np.full_like(self.ts, np.nan)
        rows = zip(self.ts, self.vals, self.slopes, margins)
        return serialize_text(rows_to_csv(["t", "psi", "psi_prime", "margin"], rows), path)


def _head_g(p: PotentialParams, s: ArrayLike) -> ArrayLike:
    """G on the head interval, where g is dominated by W: ``s^a / (a sqrt(c))`` with a = 1 + gamma/2."""
    a = 1.0 + p.gamma / 2.0
    return np.power(s, a) / (a * math.sqrt(p.c_gamma))


def _invert_g(p: PotentialParams, G_tab: np.ndarray, s_tab: np.ndarray, t: np.ndarray) -> np.ndarray:
    # Linear interpolation in log-log coordinates is exact on power laws and keeps the inverse monotone
    a = 1.0 + p.gamma / 2.0
    result = np.empty_like(t)
    head = t < G_tab[0]
    result[head] = (np.maximum(t[head], 0.0) * a * math.sqrt(p.c_gamma)) ** (1.0 / a)
    body = np.minimum(t[~head], G_tab[-1])
    result[~head] = np.exp(np.interp(np.log(body), np.log(G_tab), np.log(s_tab)))
    return result


def _tabulate_g_integral(gen: GeneratorG, p: PotentialParams) -> np.ndarray:
    s, g = gen.s_grid, gen.g_vals

    if not np.all(np.isfinite(g)):
        raise ConstructionError("Generator values must be finite", int(np.flatnonzero(~np.isfinite(g))[0]))

    terminal = g[-1] == 0.0
    alive = len(s) - 1 if terminal else len(s)
    stalled = np.flatnonzero(g[:alive] <= 0)
    if stalled.size:
        raise ConstructionError("g vanishes inside the grid, the profile stalls", int(stalled[0]))
    if g[-1] < 0:
        raise ConstructionError("g is negative at the end of the grid", len(s) - 1)

    # Product integration against the exact moments of W^(-1/2): exact when g = W
    head = _head_g(p, s[:alive])
    q = np.sqrt(potential_density(p, s[:alive]) / g[:alive])
    increments = 0.5 * (q[:-1] + q[1:]) * np.diff(head)

    G = np.empty(len(s))
    G[0] = head[0]
    G[1:alive] = head[0] + np.cumsum(increments)
    if terminal:
        # g vanishes linearly at the last node, where 1/sqrt(g) has an integrable singularity
        G[-1] = G[-2] + 2.0 * (s[-1] - s[-2]) / math.sqrt(g[-2])
    return G


def psi_from_g(gen: GeneratorG, p: PotentialParams, n_points: int = PROFILE_SIZE) -> Profile1D:
    """Recovers the profile psi with ``(psi')^2 = g(psi)`` and psi(0) = 0 as the inverse of ``G(r) = int_0^r g^(-1/2)``.

    Near s = 0 the generator is assumed to behave like W, and G is integrated in closed form on the head interval
    below the first node. The generator may vanish at its last node only, where the profile stops.

    Args:
        gen: The tabulated generator
        p: The potential
        n_points: Number of equidistant abscissas in [0, G(s_end)]

    Returns:
        The profile on [0, G(s_end)]

    Raises:
        ConstructionError: If g vanishes inside the grid or the grid is too coarse
    """
    if len(gen.s_grid) < 3:
        raise ConstructionError("At least three generator nodes are needed to resolve G")

    G = _tabulate_g_integral(gen, p)
    ts = np.linspace(0.0, G[-1], n_points)
    vals = _invert_g(p, G, gen.s_grid, ts)
    vals[-1] = gen.s_grid[-1]

    g_at = np.empty_like(vals)
    g_at[vals == 0] = np.inf
    g_at[vals > 0] = gen.evaluate(p, vals[vals > 0])
    slopes = np.sqrt(np.maximum(g_at, 0.0))

    logger.debug("Built profile on [0, %g] from %d generator nodes", G[-1], len(G))
    return Profile1D(
        ts=ts, vals=vals, params=p, slopes=slopes, inverse=(G, gen.s_grid.copy()), generator=gen.closed_form
    )


# Certification


def _check(name: str, margins: np.ndarray, ts: np.ndarray, tol: float = 0.0) -> CheckResult:
    checked = np.isfinite(margins)
    if not np.any(checked):
        return CheckResult(name=name, margin=math.inf)

    violations = np.flatnonzero(checked & (margins < -tol))
    smallest = float(np.min(margins[checked]))
    if violations.size == 0:
        return CheckResult(name=name, margin=smallest)
    first = int(violations[0])
    return CheckResult(name=name, margin=smallest, index=first, t=float(ts[first]))


def _scalar_check(name: str, margin: float, t: float, index: int) -> CheckResult:
    if margin >= 0:
        return CheckResult(name=name, margin=margin)
    return CheckResult(name=name, margin=margin, index=index, t=t)


def _certified(profile: Profile1D, checks: Sequence[CheckResult], margins: np.ndarray) -> Profile1D:
    certificate = Certificate(checks)
    for check in certificate.checks:
        if not check.passed:
            raise CertificationError(check.name, check.index, check.t, check.margin)
    return attr.evolve(profile, margins=margins, certificate=certificate)


def barrier_lemma1(p: PotentialParams, eps_bar: float = 1e-4, n: int = 2, n_points: int = PROFILE_SIZE) -> Profile1D:
    """Builds the growth barrier from ``g = W + eps_bar + C1 s^(1 - gamma/2)`` with C1 = 8n, on [0, t0].

    The profile stops at s0, the crossing ``C1 s0^(1 - gamma/2) = W(s0)``. Certified are the differential inequality
    ``2 psi'' >= 4 n psi' + W'(psi)`` at every interior grid point, psi(t0) <= 1, ``psi'(t0) <= C0 = sqrt(3 C1)`` and
    ``psi'(t0)^2 <= 3 C1 s0^(1 - gamma/2)``.

    Raises:
        ParameterRangeError: If s0 is not in (0, 1) or `eps_bar` is too large for the construction
        CertificationError: If a property fails on the grid
    """
    if eps_bar <= 0:
        raise ParameterRangeError("eps_bar", eps_bar, "eps_bar must be positive")

    c1 = 8.0 * n
    s0 = (p.c_gamma / c1) ** (1.0 / (1.0 + p.gamma / 2.0))
    if not 0.0 < s0 < 1.0:
        raise ParameterRangeError("s0", s0, "the crossing of C1 s^(1-gamma/2) and W must lie in (0, 1)")
    if eps_bar > p.c_gamma * s0 ** (-p.gamma):
        raise ParameterRangeError("eps_bar", eps_bar, f"eps_bar must not exceed W(s0) = {p.c_gamma * s0 ** -p.gamma}")

    closed_form = ClosedForm("growth", {"eps_bar": eps_bar, "c1": c1})
    profile = psi_from_g(tabulate_generator(p, closed_form, s0), p, n_points)
    ts, s = profile.ts, profile.vals
    t0 = float(ts[-1])
    c0 = math.sqrt(3.0 * c1)

    margins = np.full_like(ts, np.nan)
    inner = s[1:-1]
    margins[1:-1] = closed_form.g_prime(p, inner) - (
        4.0 * n * np.sqrt(closed_form.g(p, inner)) + _w_prime(p, inner)
    )
    g_s0 = float(closed_form.g(p, s0))

    last = len(ts) - 1
    checks = [
        _check("differential inequality", margins, ts),
        _scalar_check("psi(t0) <= 1", 1.0 - float(s[-1]), t0, last),
        _scalar_check("psi'(t0) <= C0", c0 - float(profile.slopes[-1]), t0, last),
        _scalar_check("psi'(t0)^2 <= 3 C1 s0^beta", 3.0 * c1 * s0 ** p.beta - g_s0, t0, last),
    ]
    profile = attr.evolve(profile, t_knots={"t0": t0}, s_knots={"s0": s0})
    return _certified(profile, checks, margins)


@attr.s(slots=True, frozen=True)
class _ConcaveCorrection:
    """Explicit solution of ``g'' + 2 n g' = -1`` with g(t0) = 0 that is increasing on [t0, 1]."""

    n: int = attr.ib()
    t0: float = attr.ib()

    @property
    def amplitude(self) -> float:
        # g'(t0) = exp(2n (1 - t0)) / 2n keeps g' > 0 up to t = 1
        return math.exp(2.0 * self.n * (1.0 - self.t0)) / (2.0 * self.n) + 1.0 / (2.0 * self.n)

    def value(self, t: np.ndarray) -> np.ndarray:
        k = 2.0 * self.n
        return self.amplitude * (1.0 - np.exp(-k * (t - self.t0))) / k - (t - self.t0) / k

    def first(self, t: np.ndarray) -> np.ndarray:
        return self.amplitude * np.exp(-2.0 * self.n * (t - self.t0)) - 1.0 / (2.0 * self.n)

    def second(self, t: np.ndarray) -> np.ndarray:
        return -2.0 * self.n * self.amplitude * np.exp(-2.0 * self.n * (t - self.t0))


def _inner_density_pieces(p: PotentialParams, n: int, K: float, n_points: int):
    s0 = p.c_gamma ** (1.0 / p.gamma)
    t0 = (s0 / p.c_star) ** (1.0 / p.alpha)
    if not 0.0 < t0 < 1.0:
        raise ParameterRangeError("t0", t0, "phi must reach W(phi) = 1 inside (0, 1)")

    correction = _ConcaveCorrection(n=n, t0=t0)
    head = np.linspace(0.0, t0, max(n_points // 10, 3))
    tail = np.linspace(t0, 1.0, n_points)
    dt = tail[1] - tail[0]

    tail_vals = np.asarray(exact_phi(p, tail)) + K * correction.value(tail)
    tail_slopes = np.asarray(exact_phi_prime(p, tail)) + K * correction.first(tail)
    tail_second = _phi_second(p, tail) + K * correction.second(tail)

    analytic = _w_prime(p, tail_vals) - 2.0 * tail_second - 4.0 * n * tail_slopes
    analytic[0] = np.nan

    finite_difference = np.full_like(tail, np.nan)
    d2 = (tail_vals[2:] - 2.0 * tail_vals[1:-1] + tail_vals[:-2]) / dt ** 2
    d1 = (tail_vals[2:] - tail_vals[:-2]) / (2.0 * dt)
    finite_difference[1:-1] = _w_prime(p, tail_vals[1:-1]) - 2.0 * d2 - 4.0 * n * d1

    monotonicity = _w_prime(p, tail_vals) - _w_prime(p, np.asarray(exact_phi(p, tail)))

    head_vals = np.asarray(exact_phi(p, head))
    head_slopes = np.full_like(head, np.inf)
    head_slopes[1:] = exact_phi_prime(p, head[1:])

    return {
        "s0": s0,
        "t0": t0,
        "dt": dt,
        "ts": np.concatenate([head[:-1], tail]),
        "vals": np.concatenate([head_vals[:-1], tail_vals]),
        "slopes": np.concatenate([head_slopes[:-1], tail_slopes]),
        "head": len(head) - 1,
        "analytic": analytic,
        "finite_difference": finite_difference,
        "monotonicity": monotonicity,
    }


def _inner_density_checks(p: PotentialParams, pieces: dict, c0: float) -> list:
    ts, vals, offset = pieces["ts"], pieces["vals"], pieces["head"]

    def embed(tail_margins: np.ndarray) -> np.ndarray:
        full = np.full_like(ts, np.nan)
        full[offset:] = tail_margins
        return full

    head_ts = ts[: offset + 1]
    head_error = np.full_like(ts, np.nan)
    head_error[: offset + 1] = -np.abs(vals[: offset + 1] - np.asarray(exact_phi(p, head_ts)))

    last = len(ts) - 1
    return [
        _check("psi = phi on [0, t0]", head_error, ts),
        _check("differential inequality", embed(pieces["analytic"]), ts),
        _check(
            "differential inequality (finite differences)",
            embed(pieces["finite_difference"]),
            ts,
            tol=10.0 * pieces["dt"] ** 2,
        ),
        _check("W' monotonicity", embed(pieces["monotonicity"]), ts),
        _scalar_check("psi(1) >= 2 C0", float(vals[-1]) - 2.0 * c0, float(ts[-1]), last),
    ]


def smallest_passing_k(p: PotentialParams, n: int = 2, c0: Optional[float] = None, n_points: int = 2001) -> float:
    """Smallest power of two K for which the inner density barrier passes its certification.

    Raises:
        CertificationError: If no K up to 2^40 passes
    """
    c0 = math.sqrt(24.0 * n) if c0 is None else c0
    failed = None
    for exponent in range(41):
        K = 2.0 ** exponent
        checks = _inner_density_checks(p, _inner_density_pieces(p, n, K, n_points), c0)
        failed = next((check for check in checks if not check.passed), None)
        if failed is None:
            logger.debug("Inner density barrier certifies with K = %g", K)
            return K
    raise CertificationError(failed.name, failed.index, failed.t, failed.margin)


def barrier_lemma2(
    p: PotentialParams, n: int = 2, K: Optional[float] = None, c0: Optional[float] = None, n_points: int = PROFILE_SIZE
) -> Profile1D:
    """Builds the inner density barrier ``psi = phi + K g(t) [t >= t0]`` on [0, 1].

    t0 is where the exact solution reaches ``W(phi(t0)) = 1`` and g is the explicit increasing solution of
    ``g'' + 2 n g' = -1`` with g(t0) = 0. Certified are psi = phi on [0, t0], ``2 psi'' + 4 n psi' <= W'(psi)`` on
    (t0, 1] (analytically and by centred differences) and psi(1) >= 2 C0.

    Args:
        p: The potential
        n: Space dimension of the comparison argument
        K: Amplitude of the correction, `None` picks :func:`smallest_passing_k`
        c0: The height constant C0, defaults to sqrt(24 n), the slope bound of the growth barrier
        n_points: Number of abscissas on [t0, 1]

    Raises:
        CertificationError: If `K` is too small, naming the first violating grid point
    """
    c0 = math.sqrt(24.0 * n) if c0 is None else c0
    if K is None:
        K = smallest_passing_k(p, n, c0)

    pieces = _inner_density_pieces(p, n, K, n_points)
    checks = _inner_density_checks(p, pieces, c0)

    margins = np.full_like(pieces["ts"], np.nan)
    margins[pieces["head"]:] = pieces["analytic"]
    profile = Profile1D(
        ts=pieces["ts"],
        vals=pieces["vals"],
        params=p,
        slopes=pieces["slopes"],
        t_knots={"t0": pieces["t0"]},
        s_knots={"s0": pieces["s0"]},
    )
    return _certified(profile, checks, margins)


def barrier_lemma4(
    p: PotentialParams, n: int = 1, M: float = 4.0, n_points: int = PROFILE_SIZE, tail_points: int = 2001
) -> Profile1D:
    """Builds the outer density barrier from ``g = W + (-1/2 + Cn (s^b - s1^b)) [s >= s1]``, b = 1 - gamma/2, Cn = 8n.

    The knots are s1 (W(s1) = M), s0 (W(s0) = 1), s2 (W(s2) = 1/4) and sigma, the zero of g in [s0, s2] at which
    the profile stops growing. psi is then constant up to t = 1. Certified are psi = phi up to t1 = G(s1),
    ``2 psi'' - 8 n psi' >= W'(psi)`` where g > 0 beyond s1, ``W(psi)/2 <= (psi')^2 <= W(psi)`` on {psi <= s0}
    and that psi is constant on [1/4, 1].

    Raises:
        ParameterRangeError: If M < 1 or gamma is too far from 2 for `n` and `M`
        ConstructionError: If g does not cross zero in [s0, s2]
        CertificationError: If a property fails on the grid
    """
    if M < 1:
        raise ParameterRangeError("M", M, "M >= 1 is needed so that s1 <= s0")

    c, beta = p.c_gamma, p.beta
    s1 = (c / M) ** (1.0 / p.gamma)
    s0 = c ** (1.0 / p.gamma)
    s2 = (4.0 * c) ** (1.0 / p.gamma)
    cn = 8.0 * n
    if cn * (s0 ** beta - s1 ** beta) > 0.5:
        raise ParameterRangeError(
            "gamma", p.gamma, f"s1^(1-gamma/2) = {s1 ** beta} is not close enough to 1 for n = {n}, M = {M}"
        )

    closed_form = ClosedForm("outer", {"cn": cn, "s1": s1})
    if not float(closed_form.g(p, s2)) < 0:
        raise ConstructionError(f"g fails to cross zero in [s0, s2] = [{s0}, {s2}]")
    sigma = optimize.brentq(lambda s: float(closed_form.g(p, s)), s0, s2, xtol=1e-300, rtol=1e-15)

    half = GENERATOR_SIZE // 2
    head = np.geomspace(HEAD_EPS * s1, s1, half)
    body = s1 + (sigma - s1) * (1.0 - np.geomspace(1.0, 1e-9, half))[1:]
    s_grid = np.concatenate([head, body, [sigma]])
    g_vals = closed_form.g(p, s_grid)
    g_vals[-1] = 0.0
    active = psi_from_g(GeneratorG(s_grid, g_vals, closed_form), p, n_points)

    t_sigma = float(active.ts[-1])
    t1 = active.arrival_time(s1)
    t0 = active.arrival_time(s0)
    if t_sigma < 1.0:
        rest = np.linspace(t_sigma, 1.0, tail_points)[1:]
        ts = np.concatenate([active.ts, rest])
        vals = np.concatenate([active.vals, np.full_like(rest, sigma)])
        slopes = np.concatenate([active.slopes, np.zeros_like(rest)])
    else:
        ts, vals, slopes = active.ts, active.vals, active.slopes

    s = vals
    g_at = np.zeros_like(s)
    alive = (s > 0) & (s < sigma)
    g_at[alive] = closed_form.g(p, s[alive])
    w_at = potential_density(p, s)

    follows_phi = np.full_like(ts, np.nan)
    early = ts <= t1
    follows_phi[early] = 1e-8 * p.c_star - np.abs(s[early] - np.asarray(exact_phi(p, ts[early])))

    inequality = np.full_like(ts, np.nan)
    interior = np.zeros_like(ts, dtype=bool)
    interior[1:-1] = True
    inside = interior & alive & (s > s1) & (g_at > 0)
    inequality[inside] = closed_form.g_prime(p, s[inside]) - 8.0 * n * np.sqrt(g_at[inside]) - _w_prime(p, s[inside])

    pinched = (s > 0) & (s <= s0)
    lower = np.where(pinched, g_at - 0.5 * w_at, np.nan)
    upper = np.where(pinched, w_at - g_at, np.nan)

    last = len(ts) - 1
    checks = [
        _check("psi = phi on [0, t1]", follows_phi, ts),
        _check("differential inequality", inequality, ts),
        _check("W(psi)/2 <= psi'^2", lower, ts),
        _check("psi'^2 <= W(psi)", upper, ts),
        _scalar_check("constant on [1/4, 1]", 0.25 - t_sigma, t_sigma, len(active.ts) - 1),
    ]
    profile = attr.evolve(
        active,
        ts=ts,
        vals=vals,
        slopes=slopes,
        t_knots={"t1": t1, "t0": t0, "t_sigma": t_sigma},
        s_knots={"s1": s1, "s0": s0, "s2": s2, "sigma": sigma},
    )
    return _certified(profile, checks, inequality)


# Expansion of the growth barrier at the free boundary


@attr.s(slots=True, frozen=True)
class ExpansionReport:
    #: np.ndarray: Abscissas
    ts: np.ndarray = attr.ib(eq=False)

    #: np.ndarray: (psi(t) - phi(t)) / t^(2 - alpha)
    ratios: np.ndarray = attr.ib(eq=False)

    #: float: Limit of the ratio as t -> 0, caused by the eps_bar part of g
    leading: float = attr.ib()

    #: np.ndarray: The limit plus the first correction caused by the c1 s^(1 - gamma/2) part of g
    predicted: np.ndarray = attr.ib(eq=False)

    #: float: Empirical exponent of the deviation from the leading term
    next_order_exponent: float = attr.ib()

    @property
    def spread(self) -> float:
        """Largest relative deviation of the ratios from their limit."""
        return float(np.max(np.abs(self.ratios / self.leading - 1.0)))


def leading_coefficient(p: PotentialParams, eps_bar: float) -> float:
    """Coefficient of t^(2 - alpha) in psi - phi caused by adding `eps_bar` to g."""
    return eps_bar * p.c_star ** (1.0 + p.gamma) / (2.0 * p.c_gamma * (1.0 + 1.5 * p.gamma))


def correction_exponent(p: PotentialParams) -> float:
    """Exponent (2 - gamma)/(2 + gamma) by which the c1 term of g trails the leading term of psi - phi."""
    return (2.0 - p.gamma) / (2.0 + p.gamma)


def correction_coefficient(p: PotentialParams, c1: float) -> float:
    """Coefficient of t^(2 - alpha) * t^((2 - gamma)/(2 + gamma)) in psi - phi caused by adding ``c1 s^(1 - gamma/2)``
    to g.

    For the growth barrier c1 = 8n is large compared to eps_bar and the exponent is small near gamma = 2, so this
    term dominates the ratio at every abscissa a grid can resolve.
    """
    return c1 * p.c_star ** (2.0 + p.gamma / 2.0) / (2.0 * p.c_gamma * (2.0 + p.gamma))


def shifted_profile(
    p: PotentialParams, eps_bar: float = 1e-4, s_end: float = 1.0, n_points: int = PROFILE_SIZE
) -> Profile1D:
    """The profile of ``g = W + eps_bar`` on [0, G(s_end)], the eps_bar part of the growth barrier on its own.

    Raises:
        ParameterRangeError: If `eps_bar` is not positive
    """
    if eps_bar <= 0:
        raise ParameterRangeError("eps_bar", eps_bar, "eps_bar must be positive")
    generator = tabulate_generator(p, ClosedForm("shifted", {"eps_bar": eps_bar}), s_end)
    return psi_from_g(generator, p, n_points)


def expansion_ratios(profile: Profile1D, ts: Sequence[float]) -> ExpansionReport:
    """Measures the leading order of psi - phi at the free boundary.

    The ratios tend to :func:`leading_coefficient` as t -> 0. For a ``growth`` generator the prediction adds the
    first correction of its c1 term, for a ``shifted`` generator the correction vanishes.

    Args:
        profile: A profile of a ``shifted`` or ``growth`` generator, e.g. from :func:`shifted_profile` or
            :func:`barrier_lemma1`
        ts: Small abscissas inside the profile, e.g. 1e-3, 1e-4, 1e-5

    Raises:
        ValueError: If the profile was not built from a shifted or growth generator
        ParameterRangeError: If an abscissa is not in (0, G(s_end)]
    """
    generator = profile.generator
    if generator is None or generator.kind not in ("shifted", "growth"):
        raise ValueError("The expansion is only known for profiles of shifted or growth generators")

    p = profile.params
    ts = np.asarray(ts, dtype=float)
    if np.any(ts <= 0):
        raise ParameterRangeError("t", float(ts.min()), "the expansion is measured at t > 0")

    deviation = np.asarray(profile.psi(ts)) - np.asarray(exact_phi(p, ts))
    ratios = deviation / ts ** (2.0 - p.alpha)
    leading = leading_coefficient(p, generator.params["eps_bar"])
    c1 = generator.params.get("c1", 0.0)
    predicted = leading + correction_coefficient(p, c1) * ts ** correction_exponent(p)

    residual = np.abs(ratios - leading)
    usable = residual > 0
    if np.count_nonzero(usable) >= 2:
        exponent, _ = np.polyfit(np.log(ts[usable]), np.log(residual[usable]), 1)
    else:
        exponent = math.nan
    return ExpansionReport(
        ts=ts, ratios=ratios, leading=leading, predicted=predicted, next_order_exponent=float(exponent)
    )
