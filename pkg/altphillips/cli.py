"""The ``alt-phillips`` command line.

Every subcommand resolves an :class:`ExperimentConfig` from defaults, an optional packaged preset, an optional JSON
config file and the flags, in this order, runs the corresponding pipeline and writes its outputs together with a
``manifest.json`` into the output directory. Without ``--out`` only the summary is printed.

Exit codes are 0 on success, 2 on configuration errors and 3 on numerical failures.
"""

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import attr
import numpy as np
from attr import validators

from altphillips.__version__ import __version__
from altphillips.energy import AdmissibilityError, contour_segments, eval_F, eval_J
from altphillips.field import FieldError, Grid, load_field_from_text
from altphillips.gammalab import (
    CollarError,
    RecoveryConfig,
    SweepError,
    calibrate_density_floor,
    central_free_boundary_node,
    density_radii,
    density_scan,
    energy_scaling_slope,
    gamma_sweep,
    hausdorff_trend_slope,
    interior_ball_scan,
    lsc_check,
    recovery_energy,
    recovery_sequence,
    sweep_to_csv,
)
from altphillips.potential import ParameterRangeError, make_params, normalization_integral
from altphillips.problems import make_problem, problem_names
from altphillips.profile import (
    PROFILE_SIZE,
    CertificationError,
    ClosedForm,
    ConstructionError,
    Profile1D,
    barrier_lemma1,
    barrier_lemma2,
    barrier_lemma4,
    exact_phi,
    expansion_ratios,
    ode_residual,
    profile_energy,
    profile_mass,
    psi_from_g,
    shifted_profile,
    tabulate_generator,
)
from altphillips.solver import SolverError, SolverOptions, minimize_J
from altphillips.svg import Series, SvgWriter
from altphillips.util import is_strictly_decreasing, least_squares_slope, rows_to_csv, serialize_text

logger = logging.getLogger(__name__)

COMMANDS = ("profile", "barrier", "solve", "density", "sweep", "recovery", "check")

SUITES = ("identities", "barriers", "all")

LEMMAS = ("growth", "inner-density", "outer-density")

#: Abscissas and eps_bar at which the expansion of psi - phi at the free boundary is checked
EXPANSION_TS = (1e-3, 1e-4, 1e-5)
EXPANSION_EPS_BAR = 1e-4

#: (gamma, M) pairs of the outer density barrier with n = 1; at gamma = 1.8 g does not cross zero for any M >= 1
OUTER_DENSITY_CASES = ((1.9, 1.0), (1.95, 2.0), (1.99, 4.0), (1.995, 4.0))

JOBS_VARIABLE = "ALT_PHILLIPS_JOBS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_NUMERICAL_ERRORS = (
    SolverError,
    ConstructionError,
    CertificationError,
    SweepError,
    CollarError,
    AdmissibilityError,
    FieldError,
    ArithmeticError,
)

_BARRIER_KEYS = {
    "growth": ("n", "eps_bar"),
    "inner-density": ("n", "K"),
    "outer-density": ("n", "M"),
}


@attr.s(auto_exc=True)
class ConfigError(ValueError):
    """Raised on invalid experiment configurations."""

    #: str: The offending key
    key: str = attr.ib()

    #: str: What is wrong with it
    description: str = attr.ib()

    def __str__(self) -> str:
        return f"Invalid configuration [{self.key}]: {self.description}"


@attr.s(auto_exc=True)
class CheckFailure(ArithmeticError):
    """Raised when a check suite has failing entries."""

    #: List[str]: Names of the failed checks
    names: List[str] = attr.ib()

    def __str__(self) -> str:
        return f"Failed checks: {', '.join(self.names)}"


def parse_grid(spec: str) -> Grid:
    """Parses ``1d:N``, ``2d:N`` or ``2d:N:extent_x,extent_y``.

    N is the number of cells per unit length, so the explicit form has ``round(N * extent)`` cells per axis.

    Raises:
        ConfigError: If `spec` is malformed
    """
    parts = str(spec).split(":")
    try:
        if len(parts) not in (2, 3) or parts[0] not in ("1d", "2d"):
            raise ValueError("expected 1d:N, 2d:N or 2d:N:extent_x,extent_y")
        dim = int(parts[0][0])
        n = int(parts[1])
        if n < 2:
            raise ValueError("need at least two cells per unit length")
        if len(parts) == 3:
            extent = tuple(float(e) for e in parts[2].split(","))
            if len(extent) != dim or min(extent) <= 0:
                raise ValueError(f"need {dim} positive extents")
        else:
            extent = (1.0,) * dim
        return Grid.box(extent, tuple(int(round(n * e)) for e in extent))
    except (ValueError, FieldError) as e:
        raise ConfigError("grid", f"[{spec}] {e}")


def _default_jobs() -> int:
    value = os.environ.get(JOBS_VARIABLE, "1")
    try:
        return int(value)
    except ValueError:
        raise ConfigError(JOBS_VARIABLE, f"expected an integer, was [{value}]")


def _check_command(instance, attribute, value):
    if value not in COMMANDS:
        raise ConfigError(attribute.name, f"[{value}] is not one of {COMMANDS}")


def _check_gamma(instance, attribute, value):
    if not 0.0 < value < 2.0:
        raise ConfigError(attribute.name, f"[{value}] does not lie in (0, 2)")


def _check_gammas(instance, attribute, value):
    if not value:
        raise ConfigError(attribute.name, "needs at least one exponent")
    for gamma in value:
        _check_gamma(instance, attribute, gamma)


def _check_grid(instance, attribute, value):
    parse_grid(value)


def _check_problem(instance, attribute, value):
    if value not in problem_names():
        raise ConfigError(attribute.name, f"[{value}] is not one of {problem_names()}")


def _check_choice(choices):
    def check(instance, attribute, value):
        if value not in choices:
            raise ConfigError(attribute.name, f"[{value}] is not one of {choices}")

    return check


def _check_positive(instance, attribute, value):
    if value < 1:
        raise ConfigError(attribute.name, f"must be positive, was [{value}]")


def _float_tuple(values) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


def _optional_float_tuple(values) -> Optional[Tuple[float, ...]]:
    return None if values is None else _float_tuple(values)


@attr.s(slots=True, frozen=True)
class ExperimentConfig:
    """The parameters of one run, grouped the way the flags are."""

    #: str: The subcommand
    command: str = attr.ib(validator=_check_command)

    #: float: Exponent for single-gamma commands
    gamma: float = attr.ib(default=1.0, converter=float, validator=_check_gamma)

    #: Tuple[float, ...]: Exponents of sweeps and recovery sequences
    gammas: Tuple[float, ...] = attr.ib(
        default=(1.0, 1.5, 1.8, 1.9, 1.95), converter=_float_tuple, validator=_check_gammas
    )

    #: str: Grid spec, see :func:`parse_grid`
    grid: str = attr.ib(default="1d:1000", validator=_check_grid)

    #: str: Name of the boundary problem template
    problem: str = attr.ib(default="phi-right", validator=_check_problem)

    #: dict: Parameters of the boundary problem template
    problem_params: dict = attr.ib(factory=dict, converter=dict)

    #: dict: Keyword arguments of :class:`SolverOptions`
    solver: dict = attr.ib(factory=dict, converter=dict)

    #: dict: Which barrier to build (key ``lemma``) and its parameters
    barrier: dict = attr.ib(factory=lambda: {"lemma": "growth"}, converter=dict)

    #: dict: Truncation ``eps`` and ``erosion_cells`` of recovery sequences
    recovery: dict = attr.ib(factory=lambda: {"eps": 0.01, "erosion_cells": 1}, converter=dict)

    #: int: Number of abscissas of 1d profiles
    points: int = attr.ib(default=PROFILE_SIZE, converter=int)

    #: str: Field file to analyse instead of solving, for ``density``
    field: Optional[str] = attr.ib(default=None)

    #: Tuple[float, ...]: Radii of the density scan, chosen from the grid if `None`
    radii: Optional[Tuple[float, ...]] = attr.ib(default=None, converter=_optional_float_tuple)

    #: str: Test suite of ``check``
    suite: str = attr.ib(default="identities", validator=_check_choice(SUITES))

    #: int: Number of worker processes of sweeps
    jobs: int = attr.ib(factory=_default_jobs, converter=int, validator=_check_positive)

    #: str: Output directory
    out: Optional[str] = attr.ib(default=None)

    @points.validator
    def _check_points(self, attribute, value):
        if value < 3:
            raise ConfigError(attribute.name, f"need at least 3 points, was [{value}]")

    @barrier.validator
    def _check_barrier(self, attribute, value):
        lemma = value.get("lemma", "growth")
        if lemma not in LEMMAS:
            raise ConfigError("barrier.lemma", f"[{lemma}] is not one of {LEMMAS}")
        unknown = set(value) - {"lemma"} - set(_BARRIER_KEYS[lemma])
        if unknown:
            raise ConfigError("barrier", f"{sorted(unknown)} are not parameters of the {lemma} barrier")

    @recovery.validator
    def _check_recovery(self, attribute, value):
        unknown = set(value) - {"eps", "erosion_cells"}
        if unknown:
            raise ConfigError("recovery", f"unknown keys {sorted(unknown)}")

    def grid_spec(self) -> Grid:
        return parse_grid(self.grid)

    def solver_options(self) -> SolverOptions:
        try:
            return SolverOptions.from_dict(self.solver)
        except (TypeError, ValueError) as e:
            raise ConfigError("solver", str(e))

    def recovery_config(self) -> RecoveryConfig:
        return RecoveryConfig(gamma_list=self.gammas, **{"eps": 0.01, **self.recovery})

    def to_dict(self) -> dict:
        result = attr.asdict(self)
        result["gammas"] = list(self.gammas)
        result["radii"] = None if self.radii is None else list(self.radii)
        return result

    @classmethod
    def from_dict(cls, values: dict) -> "ExperimentConfig":
        """Builds a config from a dictionary as written by :meth:`to_dict`.

        Raises:
            ConfigError: On unknown keys or invalid values
        """
        known = {a.name for a in attr.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(", ".join(sorted(unknown)), "unknown configuration keys")
        try:
            return cls(**values)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError("config", str(e))


# Loading and merging


def load_preset(name: str) -> dict:
    """Loads the packaged preset `name` from the ``resources`` package.

    Raises:
        ConfigError: If there is no such preset
    """
    try:
        import importlib.resources as pkg_resources
    except ImportError:
        # Try backported to PY<37 `importlib_resources`.
        import importlib_resources as pkg_resources

    from . import resources  # relative-import the *package* containing the presets

    try:
        with pkg_resources.open_text(resources, f"{name}.json") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError("preset", f"there is no preset named [{name}]")


def load_config_file(path: str) -> dict:
    """Loads a JSON config file; manifests are accepted and their ``config`` entry is used.

    Raises:
        ConfigError: If the file cannot be read or is not a JSON object
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            values = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError("config", f"cannot read [{path}]: {e}")
    if not isinstance(values, dict):
        raise ConfigError("config", f"[{path}] does not contain a JSON object")
    if "config" in values and isinstance(values["config"], dict):
        values = values["config"]
    return values


def merge_config(base: dict, overrides: dict) -> dict:
    """Merges `overrides` into a copy of `base`; nested dictionaries are merged key by key."""
    result = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = merge_config(result[key], value)
        else:
            result[key] = value
    return result


# Flags


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got [{text}]")


def _key_value(text: str) -> Tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got [{text}]")
    try:
        return key, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number for [{key}], got [{value}]")


# Destination of a flag in the config tree
_FLAG_PATHS = {
    "gamma": ("gamma",),
    "gammas": ("gammas",),
    "grid": ("grid",),
    "problem": ("problem",),
    "ordering": ("solver", "ordering"),
    "seed": ("solver", "seed_profile"),
    "max_sweeps": ("solver", "max_sweeps"),
    "energy_tol": ("solver", "energy_tol"),
    "delta_schedule": ("solver", "delta_schedule"),
    "nested_levels": ("solver", "nested_levels"),
    "lemma": ("barrier", "lemma"),
    "n": ("barrier", "n"),
    "eps_bar": ("barrier", "eps_bar"),
    "K": ("barrier", "K"),
    "M": ("barrier", "M"),
    "points": ("points",),
    "eps": ("recovery", "eps"),
    "erosion_cells": ("recovery", "erosion_cells"),
    "suite": ("suite",),
    "jobs": ("jobs",),
    "out": ("out",),
    "field": ("field",),
    "radii": ("radii",),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", metavar="FILE", help="JSON config file or manifest of an earlier run")
    common.add_argument("--preset", metavar="NAME", help="packaged preset, e.g. chord, halfplane or phi-right")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--jobs", type=int, help=f"worker processes, defaults to ${JOBS_VARIABLE} or 1")
    common.add_argument("-v", "--verbose", action="count", help="log INFO, repeat for DEBUG")

    single = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    single.add_argument("--gamma", type=float, help="exponent of the potential in (0, 2)")

    many = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    many.add_argument("--gammas", type=_float_list, help="comma separated exponents")

    domain = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    domain.add_argument("--grid", help="1d:N, 2d:N or 2d:N:extent_x,extent_y")
    domain.add_argument("--problem", "--bc", dest="problem", choices=problem_names(), help="boundary data template")
    domain.add_argument(
        "--problem-param",
        dest="problem_param",
        action="append",
        type=_key_value,
        metavar="KEY=VALUE",
        help="template parameter, e.g. front=0.5",
    )

    solver = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    solver.add_argument("--ordering", choices=("lexicographic", "red-black"))
    solver.add_argument("--seed", choices=("flat", "distance-profile"))
    solver.add_argument("--max-sweeps", dest="max_sweeps", type=int)
    solver.add_argument("--energy-tol", dest="energy_tol", type=float)
    solver.add_argument("--delta-schedule", dest="delta_schedule", type=_float_list)
    solver.add_argument("--nested-levels", dest="nested_levels", type=int)

    points = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    points.add_argument("--points", type=int, help="number of abscissas")

    parser = argparse.ArgumentParser(prog="alt-phillips", description="Numerical lab for the Alt-Phillips energy")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    commands.add_parser("profile", parents=[common, single, points], help="exact 1d profile")

    barrier = commands.add_parser("barrier", parents=[common, single, points], help="certified barrier profiles")
    barrier.add_argument("--lemma", choices=LEMMAS)
    barrier.add_argument("--n", type=int, help="space dimension of the comparison argument")
    barrier.add_argument("--eps-bar", dest="eps_bar", type=float)
    barrier.add_argument("--K", type=float, help="amplitude of the inner density correction")
    barrier.add_argument("--M", type=float, help="height parameter of the outer density barrier")

    commands.add_parser("solve", parents=[common, single, domain, solver], help="minimize J")

    density = commands.add_parser("density", parents=[common, single, domain, solver], help="density ratios")
    density.add_argument("--field", metavar="FILE", help="field file to scan instead of solving")
    density.add_argument("--radii", type=_float_list)

    commands.add_parser("sweep", parents=[common, many, domain, solver], help="gamma sweep against a reference pair")

    recovery = commands.add_parser("recovery", parents=[common, many, domain], help="recovery sequences")
    recovery.add_argument("--eps", type=float, help="truncation level")
    recovery.add_argument("--erosion-cells", dest="erosion_cells", type=int)

    check = commands.add_parser("check", parents=[common], help="identity and certification suites")
    check.add_argument("--suite", choices=SUITES)

    return parser


def flag_overrides(args: argparse.Namespace) -> dict:
    """The config entries that were set by flags."""
    result = {}
    for name, path in _FLAG_PATHS.items():
        if not hasattr(args, name):
            continue
        target = result
        for key in path[:-1]:
            target = target.setdefault(key, {})
        target[path[-1]] = getattr(args, name)
    if hasattr(args, "problem_param"):
        result["problem_params"] = dict(args.problem_param)
    return result


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults < preset < config file < flags."""
    values = {}
    if hasattr(args, "preset"):
        values = merge_config(values, load_preset(args.preset))
    if hasattr(args, "config"):
        values = merge_config(values, load_config_file(args.config))
    values = merge_config(values, flag_overrides(args))
    values["command"] = args.command

    cfg = ExperimentConfig.from_dict(values)
    # Pin the solver options so that the manifest shows every knob
    return attr.evolve(cfg, solver=cfg.solver_options().to_dict())


# Outputs


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def to_json(data, path: Optional[Path] = None) -> Optional[str]:
    text = json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"
    return serialize_text(text, path)


@attr.s(slots=True)
class Outputs:
    """The output directory of a run; every write is a no-op without one."""

    directory: Optional[Path] = attr.ib(converter=lambda v: None if v is None else Path(v))

    def __attrs_post_init__(self):
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Optional[Path]:
        return None if self.directory is None else self.directory / name

    def json(self, name: str, data):
        if self.directory is not None:
            to_json(data, self.path(name))
            logger.info("Wrote %s", self.path(name))

    def text(self, name: str, text: str):
        if self.directory is not None:
            serialize_text(text, self.path(name))
            logger.info("Wrote %s", self.path(name))

    def svg(self, name: str, draw: Callable[[str], None]):
        if self.directory is not None:
            draw(str(self.path(name)))
            logger.info("Wrote %s", self.path(name))

    def manifest(self, cfg: ExperimentConfig, argv: Sequence[str], calibrated: Optional[dict] = None):
        self.json(
            "manifest.json",
            {"version": __version__, "config": cfg.to_dict(), "argv": list(argv), "calibrated": calibrated or {}},
        )


def _print_table(rows: Sequence[Sequence], header: Sequence[str]):
    widths = [max([len(str(h))] + [len(_cell(r[i])) for r in rows]) for i, h in enumerate(header)]
    print("  ".join(str(h).ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(_cell(v).ljust(w) for v, w in zip(row, widths)))


def _cell(value) -> str:
    if isinstance(value, bool):
        return "pass" if value else "FAIL"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


# Commands


def _phi_series(profile: Profile1D) -> Series:
    return Series("phi", profile.ts, exact_phi(profile.params, profile.ts))


def run_profile(cfg: ExperimentConfig, out: Outputs) -> dict:
    p = make_params(cfg.gamma)
    generator = tabulate_generator(p, ClosedForm("potential"), float(exact_phi(p, 1.0)))
    profile = psi_from_g(generator, p, cfg.points)
    deviation = np.abs(profile.vals - np.asarray(exact_phi(p, profile.ts)))
    profile = attr.evolve(profile, margins=-deviation)

    out.text("profile.csv", profile.to_csv())
    out.svg(
        "profile.svg",
        lambda path: SvgWriter(title=f"profile, gamma = {p.gamma}").plot(
            path, [Series("psi", profile.ts, profile.vals), _phi_series(profile)]
        ),
    )
    _print_table(
        [(p.gamma, p.c_star, p.alpha, float(deviation.max()))], ["gamma", "c_star", "alpha", "max |psi - phi|"]
    )
    return {}


def build_barrier(cfg: ExperimentConfig) -> Profile1D:
    p = make_params(cfg.gamma)
    params = dict(cfg.barrier)
    lemma = params.pop("lemma", "growth")
    if "n" in params:
        params["n"] = int(params["n"])
    if lemma == "growth":
        return barrier_lemma1(p, n_points=cfg.points, **params)
    if lemma == "inner-density":
        return barrier_lemma2(p, n_points=cfg.points, **params)
    return barrier_lemma4(p, n_points=cfg.points, **params)


def run_barrier(cfg: ExperimentConfig, out: Outputs) -> dict:
    profile = build_barrier(cfg)
    certificate = profile.certificate

    out.text("barrier.csv", profile.to_csv())
    out.json(
        "certificate.json",
        {
            "lemma": cfg.barrier.get("lemma", "growth"),
            "gamma": cfg.gamma,
            "passed": certificate.passed,
            "checks": certificate.to_dict(),
            "t_knots": profile.t_knots,
            "s_knots": profile.s_knots,
        },
    )
    out.svg(
        "barrier.svg",
        lambda path: SvgWriter(title=f"{cfg.barrier.get('lemma', 'growth')} barrier, gamma = {cfg.gamma}").plot(
            path, [Series("psi", profile.ts, profile.vals), _phi_series(profile)]
        ),
    )
    _print_table([(c.name, c.margin, c.passed) for c in certificate.checks], ["check", "margin", "result"])
    return {}


def _solve(cfg: ExperimentConfig):
    grid = cfg.grid_spec()
    p = make_params(cfg.gamma)
    problem = make_problem(cfg.problem, **cfg.problem_params)
    u, report = minimize_J(grid, p, problem.boundary(grid, p), cfg.solver_options())
    return p, u, report


def run_solve(cfg: ExperimentConfig, out: Outputs) -> dict:
    p, u, report = _solve(cfg)
    energy = eval_J(u, p)

    out.text("field.txt", u.to_text())
    out.json("report.json", report.to_dict())
    out.json("energy.json", energy.to_record(p.gamma, u.grid.h))
    _print_table(
        [(p.gamma, u.grid.h, energy.total, report.sweeps_used, report.converged, report.dead_fraction)],
        ["gamma", "h", "J", "sweeps", "converged", "dead fraction"],
    )
    return {}


def run_density(cfg: ExperimentConfig, out: Outputs) -> dict:
    p = make_params(cfg.gamma)
    if cfg.field is not None:
        try:
            with open(cfg.field, "r", encoding="utf-8") as f:
                u = load_field_from_text(f)
        except OSError as e:
            raise ConfigError("field", f"cannot read [{cfg.field}]: {e}")
    else:
        _, u, _ = _solve(cfg)

    x0 = central_free_boundary_node(u)
    if x0 is None:
        raise FieldError("The field has no free boundary node to scan around")
    radii = list(cfg.radii) if cfg.radii is not None else density_radii(u.grid, x0)
    if not radii:
        raise FieldError(f"Free boundary node {x0} is too close to the box boundary for a scan from 8h")

    report = density_scan(u, x0, radii)
    slope = energy_scaling_slope(u, p, x0, radii) if len(radii) > 1 else math.nan
    interior = interior_ball_scan(u, x0, radii)

    out.json(
        "density.json",
        {
            **report.to_dict(),
            "node": list(x0),
            "minimum": report.minimum,
            "maximum": report.maximum,
            "energy_scaling_slope": slope,
            "predicted_slope": u.grid.dim - p.alpha * p.gamma,
            "interior_balls": [list(pair) for pair in interior],
        },
    )
    _print_table(list(zip(report.radii, report.ratios_positive, report.ratios_zero)), ["r", "positive", "zero"])
    print(f"energy scaling slope {slope:.4f}, predicted {u.grid.dim - p.alpha * p.gamma:.4f}")
    return {}


def run_sweep(cfg: ExperimentConfig, out: Outputs) -> dict:
    grid = cfg.grid_spec()
    problem = make_problem(cfg.problem, **cfg.problem_params)
    reference = problem.reference(grid, make_params(cfg.gammas[0]))
    records, fields = gamma_sweep(
        problem, cfg.gammas, grid, reference, cfg.solver_options(), jobs=cfg.jobs, keep_fields=True
    )

    calibrated = {}
    usable = [r for r in records if not math.isnan(r.fb_hausdorff_to_reference)]
    if len(usable) > 1:
        calibrated["hausdorff_trend_slope"] = hausdorff_trend_slope(records)
    oracle = [r for r in records if r.gamma == records[0].gamma]
    if any(not math.isnan(r.density_min) for r in oracle):
        floor = calibrate_density_floor(oracle)
        calibrated["density_floor"] = floor
        calibrated["density_floor_gamma"] = records[0].gamma
        below = [r.gamma for r in records if r.density_min < floor]
        if below:
            logger.warning("Density ratios fall below the calibrated floor %g at gamma %s", floor, below)

    out.text("sweep.csv", sweep_to_csv(records))
    out.json("records.json", [r.to_dict() for r in records])
    out.svg(
        "trend.svg",
        lambda path: SvgWriter(title="free boundary distance to the reference").plot(
            path,
            [
                Series("hausdorff", [r.gamma for r in usable], [r.fb_hausdorff_to_reference for r in usable]),
                Series("transform L1 gap", [r.gamma for r in records], [r.transform_l1_gap for r in records]),
            ],
        ),
    )
    if grid.dim == 2:
        box = (grid.origin[0], grid.origin[0] + grid.extent[0], grid.origin[1], grid.origin[1] + grid.extent[1])
        reference_segments = contour_segments(reference[1].member.astype(float), grid, 0.5)
        out.svg(
            "overlay.svg",
            lambda path: SvgWriter(title=f"free boundary at gamma = {records[-1].gamma}").overlay(
                path, box, contour_segments(fields[-1].values, grid, 0.0), reference_segments
            ),
        )

    rows = [
        (r.gamma, r.energy.total, r.fb_hausdorff_to_reference, r.density_min, r.transform_l1_gap, r.converged)
        for r in records
    ]
    _print_table(rows, ["gamma", "J", "hausdorff", "density min", "L1 gap", "converged"])
    return calibrated


def run_recovery(cfg: ExperimentConfig, out: Outputs) -> dict:
    grid = cfg.grid_spec()
    problem = make_problem(cfg.problem, **cfg.problem_params)
    rc = cfg.recovery_config()
    pair = problem.reference(grid, make_params(rc.gamma_list[0]))
    if pair is None:
        raise FieldError(f"Problem [{problem.name}] has no limiting pair to recover")

    limit_energy = eval_F(*pair).total
    energies, sequence = [], []
    for gamma in rc.gamma_list:
        p_k = make_params(gamma)
        energies.append(recovery_energy(pair, rc, p_k))
        sequence.append((p_k, recovery_sequence(pair, rc, p_k)))
        logger.info("Recovery member gamma %s: layered J %g", gamma, energies[-1].layered)

    layered = [e.layered for e in energies]
    gaps = [abs(e - limit_energy) for e in layered]
    lsc = lsc_check(sequence, pair, energies=layered)

    rows = [
        (e.gamma, e.nodal.total, e.layered, abs(e.layered - limit_energy), e.collar, e.transform_l1_gap)
        for e in energies
    ]
    header = ["gamma", "nodal", "layered", "gap", "collar", "transform_l1_gap"]
    out.text("recovery.csv", rows_to_csv(header, rows))
    out.json(
        "lsc.json",
        {
            **lsc.to_dict(),
            "gaps_strictly_decreasing": is_strictly_decreasing(gaps),
            "recovery": rc.to_dict(),
            "energies": [e.to_dict() for e in energies],
        },
    )
    out.svg(
        "recovery.svg",
        lambda path: SvgWriter(title="recovery energies").plot(
            path,
            [
                Series("layered J", rc.gamma_list, layered),
                Series("F", rc.gamma_list, [limit_energy] * len(layered)),
            ],
        ),
    )
    _print_table(rows, header)
    print(f"F = {limit_energy:.6g}, liminf margin {lsc.margin:.4g}, {_cell(lsc.passed)}")
    return {}


# Check suites


@attr.s(slots=True, frozen=True)
class SuiteCheck:
    name: str = attr.ib()
    value: float = attr.ib(converter=float)
    tolerance: float = attr.ib(converter=float)
    passed: bool = attr.ib(validator=validators.instance_of(bool))

    @classmethod
    def within(cls, name: str, value: float, tolerance: float) -> "SuiteCheck":
        return cls(name, value, tolerance, bool(value <= tolerance))


def identity_checks() -> List[SuiteCheck]:
    """Closed-form identities of the potential and the exact profile."""
    checks = []
    for gamma in (0.1, 0.5, 1.0, 1.5, 1.9, 1.99):
        p = make_params(gamma)
        checks.append(SuiteCheck.within(f"normalization gamma={gamma}", abs(normalization_integral(p) - 1.0), 1e-10))

    p = make_params(1.0)
    ts = np.geomspace(1e-3, 1.0, 200)
    first_order, second_order = ode_residual(p, ts)
    checks.append(SuiteCheck.within("ode residual phi' = sqrt(W(phi))", float(np.abs(first_order).max()), 1e-8))
    scale = np.maximum(1.0, np.abs(2.0 * p.gamma * p.c_gamma * np.asarray(exact_phi(p, ts)) ** (-p.gamma - 1.0)))
    checks.append(SuiteCheck.within("ode residual 2 phi'' = W'(phi)", float(np.abs(second_order / scale).max()), 1e-8))

    generator = tabulate_generator(p, ClosedForm("potential"), float(exact_phi(p, 1.0)))
    profile = psi_from_g(generator, p)
    deviation = float(np.abs(profile.vals - np.asarray(exact_phi(p, profile.ts))).max())
    checks.append(SuiteCheck.within("psi_from_g(W) = phi", deviation, 1e-6))

    for gamma in (0.5, 1.0, 1.5):
        p = make_params(gamma)
        energy = profile_energy(p, 1.0)
        checks.append(
            SuiteCheck.within(f"profile energy identity gamma={gamma}", abs(energy - profile_mass(p, 0.0, 1.0)), 1e-6)
        )

    p = make_params(1.0)
    radii = np.geomspace(1e-3, 1.0, 7)
    slope = least_squares_slope(np.log(radii), np.log([profile_energy(p, r) for r in radii]))
    predicted = 1.0 - p.alpha * p.gamma
    checks.append(SuiteCheck.within("energy scaling slope 1 - alpha gamma", abs(slope - predicted), 1e-3))

    for gamma in (1.0, 1.5, 1.9):
        report = expansion_ratios(shifted_profile(make_params(gamma), EXPANSION_EPS_BAR), EXPANSION_TS)
        checks.append(SuiteCheck.within(f"free boundary expansion gamma={gamma}", report.spread, 0.1))
    return checks


def _certifies(name: str, build: Callable[[], Profile1D]) -> SuiteCheck:
    try:
        certificate = build().certificate
    except (CertificationError, ConstructionError, ParameterRangeError) as e:
        logger.warning("%s: %s", name, e)
        return SuiteCheck(name, -math.inf, 0.0, False)
    margin = min(check.margin for check in certificate.checks)
    return SuiteCheck(name, margin, 0.0, certificate.passed)


def barrier_checks() -> List[SuiteCheck]:
    """Certification of the three barrier families on a grid of relative size 1e-4."""
    checks = []
    for gamma in (1.8, 1.9, 1.95):
        checks.append(_certifies(f"growth barrier gamma={gamma}", lambda g=gamma: barrier_lemma1(make_params(g))))
    for gamma in (1.0, 1.5):
        checks.append(
            _certifies(f"inner density barrier gamma={gamma}", lambda g=gamma: barrier_lemma2(make_params(g)))
        )
    for gamma, M in OUTER_DENSITY_CASES:
        checks.append(
            _certifies(
                f"outer density barrier gamma={gamma} M={M}",
                lambda g=gamma, m=M: barrier_lemma4(make_params(g), n=1, M=m),
            )
        )
    return checks


def run_check(cfg: ExperimentConfig, out: Outputs) -> dict:
    checks = []
    if cfg.suite in ("identities", "all"):
        checks.extend(identity_checks())
    if cfg.suite in ("barriers", "all"):
        checks.extend(barrier_checks())

    out.json("check.json", [attr.asdict(c) for c in checks])
    _print_table([(c.name, c.value, c.tolerance, c.passed) for c in checks], ["check", "value", "tolerance", "result"])
    failed = [c.name for c in checks if not c.passed]
    if failed:
        raise CheckFailure(failed)
    return {}


_RUNNERS: Dict[str, Callable[[ExperimentConfig, Outputs], dict]] = {
    "profile": run_profile,
    "barrier": run_barrier,
    "solve": run_solve,
    "density": run_density,
    "sweep": run_sweep,
    "recovery": run_recovery,
    "check": run_check,
}


def _configure_logging(verbosity: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Runs the command line `argv` and returns the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK

    _configure_logging(getattr(args, "verbose", 0))

    try:
        cfg = resolve_config(args)
    except (ConfigError, ParameterRangeError) as e:
        print(f"alt-phillips: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out = Outputs(cfg.out)
    out.manifest(cfg, argv)
    try:
        calibrated = _RUNNERS[cfg.command](cfg, out)
    except (ConfigError, ParameterRangeError) as e:
        print(f"alt-phillips: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as e:
        print(f"alt-phillips: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL

    if calibrated:
        out.manifest(cfg, argv, calibrated)
    return EXIT_OK


def main():
    sys.exit(run())
