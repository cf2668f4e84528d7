"""Configuration-driven experiment runs: oracle studies and PML-thickness sweeps.

Runs never stop on a single failed point.  Failures are collected in a
manifest next to the partial results, and ``RunResult.ok`` tells the caller
whether everything succeeded.
"""
from __future__ import annotations

import configparser
import csv
import os
from importlib import resources
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .asymptotics import DecayFit, ErrorCurve, InconclusiveFit, fit_decay
from .geometry import CATALOG, DEFAULT_H, TWO_PI, PmlProfile, ProfileKind, p_tilde
from .quadrature import QuadratureError
from .solver import Rect, SolveConfig, h1_relative_error, solve_scattering
from .spectral import OracleParams, w0_field, w1_field
from .spectral_mp import w0_field_mp, w1_field_mp

THREADS_ENV = "PMLP_THREADS"
CSV_HEADER = ("L", "ReP", "ImP", "E_rel")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (CLI exit code 1)."""


@dataclass(frozen=True)
class RunConfig:
    # geometry
    surface: str = "gamma1"
    H: float | None = None
    sigma_max: float = 2.0
    profile: str = "PaperSmooth"
    # solver
    resolution: int = 64
    lateral_cells: int = 1
    source: tuple = (0.0, 1.5)
    region_d: tuple = (-0.3, 0.3, 1.2, 1.8)
    cutoff_radii: tuple | None = None
    S: float = 2.8
    # sweep
    k_values: tuple = (1.5,)
    L_values: tuple = (0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0)
    reference_L: float | None = None
    floor: float = 1e-7
    # oracle
    oracle_k_values: tuple = (0.5,)
    P_values: tuple = (20.0, 40.0, 80.0, 160.0)
    point: tuple = (1.0, 0.5)
    x2_star: float = 1.5
    precision: str = "auto"
    # execution
    tol: float = 1e-10
    threads: int = 1

    def __post_init__(self):
        if self.surface not in CATALOG:
            raise ConfigError(f"unknown surface {self.surface!r}; choose from {sorted(CATALOG)}")
        try:
            ProfileKind(self.profile)
        except ValueError:
            raise ConfigError(f"unknown profile {self.profile!r}") from None
        if self.precision not in ("auto", "double", "mp"):
            raise ConfigError("precision must be auto, double or mp")
        for name in ("k_values", "oracle_k_values"):
            if any(not v > 0 for v in getattr(self, name)):
                raise ConfigError(f"{name} must be positive")
        for name in ("L_values", "P_values"):
            vals = getattr(self, name)
            if any(not v > 0 for v in vals) or list(vals) != sorted(set(vals)):
                raise ConfigError(f"{name} must be positive and strictly increasing")
        if self.L_values and self.reference_length <= max(self.L_values):
            raise ConfigError("reference_L must exceed every swept L")
        if self.threads < 1 or not self.tol > 0:
            raise ConfigError("threads must be >= 1 and tol > 0")
        if len(self.source) != 2 or len(self.point) != 2 or len(self.region_d) != 4:
            raise ConfigError("source and point need 2 numbers, region_d needs 4")

    @property
    def height(self):
        return DEFAULT_H[self.surface] if self.H is None else self.H

    @property
    def reference_length(self):
        if self.reference_L is not None:
            return self.reference_L
        return 1.5 * max(self.L_values)

    def profile_for(self, L):
        return PmlProfile(self.height, L, self.sigma_max, ProfileKind(self.profile))

    def solve_config(self, k, L):
        x1a, x1b, x2a, x2b = self.region_d
        try:
            return SolveConfig(CATALOG[self.surface], self.profile_for(L), k,
                               tuple(self.source), TWO_PI * self.lateral_cells,
                               self.resolution, Rect((x1a, x1b), (x2a, x2b)),
                               None if self.cutoff_radii is None else tuple(self.cutoff_radii),
                               self.S)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


# (section, key) -> RunConfig field
_LAYOUT = {
    "geometry": ("surface", "H", "sigma_max", "profile"),
    "solver": ("resolution", "lateral_cells", "source", "region_d", "cutoff_radii", "S"),
    "sweep": ("k_values", "L_values", "reference_L", "floor"),
    "oracle": ("oracle_k_values", "P_values", "point", "x2_star", "precision"),
    "run": ("tol", "threads"),
}


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _parse_value(name, text, default):
    text = text.strip()
    if name in ("H", "reference_L", "cutoff_radii"):
        if text.lower() in ("", "none", "auto"):
            return None
        return _floats(text) if name == "cutoff_radii" else float(text)
    if isinstance(default, tuple):
        return _floats(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def bundled_configs():
    """Names of the configs shipped with the package."""
    root = resources.files(__package__) / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def _locate(path):
    path = Path(path)
    if not path.exists() and str(path) in bundled_configs():
        return resources.files(__package__) / "configs" / f"{path}.ini"
    return path


def read_config(path=None, **overrides) -> RunConfig:
    """RunConfig from an INI file (sections geometry/solver/sweep/oracle/run).

    ``path`` may also name a bundled config, see :func:`bundled_configs`.
    """
    defaults = RunConfig()
    values = {}
    if path is not None:
        path = _locate(path)
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for section in parser.sections():
            if section not in _LAYOUT:
                raise ConfigError(f"unknown section [{section}]")
            for key, text in parser.items(section):
                if key not in {k.lower() for k in _LAYOUT[section]}:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                name = next(k for k in _LAYOUT[section] if k.lower() == key)
                try:
                    values[name] = _parse_value(name, text, getattr(defaults, name))
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def resolve_threads(flag=None, configured=1):
    """--threads wins over PMLP_THREADS, which wins over the config file."""
    if flag is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        try:
            flag = int(env) if env else configured
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if flag < 1:
        raise ConfigError(f"worker count must be at least 1, got {flag}")
    return flag


@dataclass(frozen=True)
class Sample:
    L: float
    p_tilde: complex
    e_rel: float


@dataclass(frozen=True)
class SweepCurve:
    """E_rel (or |w|) samples against L for one wavenumber, plus run metadata."""

    k: float
    samples: tuple = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ls = [s.L for s in self.samples]
        if ls != sorted(set(ls)):
            raise ValueError("curve samples must have strictly increasing L")
        if any(not s.e_rel > 0 for s in self.samples):
            raise ValueError("curve values must be positive")

    def error_curve(self, floor=0.0):
        """The |p_tilde| view used by the decay fits."""
        return ErrorCurve(np.array([abs(s.p_tilde) for s in self.samples]),
                          np.array([s.e_rel for s in self.samples]), floor)


def pre_floor(curve: SweepCurve, floor):
    """Leading run of samples that keep decreasing and stay above ``floor``."""
    out = []
    for s in curve.samples:
        if s.e_rel <= floor or (out and s.e_rel >= out[-1].e_rel):
            break
        out.append(s)
    return replace(curve, samples=tuple(out))


def try_fit(curve: SweepCurve, floor=0.0):
    try:
        return fit_decay(curve.error_curve(floor))
    except InconclusiveFit:
        return None


@dataclass
class RunResult:
    curves: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures


def _fmt(x):
    return "%.17g" % x


def emit_csv(curve: SweepCurve, path):
    """Header L,ReP,ImP,E_rel and one 17-digit row per sample."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in curve.samples:
            w.writerow([_fmt(s.L), _fmt(s.p_tilde.real), _fmt(s.p_tilde.imag), _fmt(s.e_rel)])


def read_csv(path, k=float("nan")) -> SweepCurve:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: missing header {','.join(CSV_HEADER)}")
    samples = tuple(Sample(float(a), complex(float(b), float(c)), float(d))
                    for a, b, c, d in rows[1:])
    return SweepCurve(k, samples)


def emit_gnuplot(curve: SweepCurve, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# L E_rel\n")
        for s in curve.samples:
            fh.write(f"{_fmt(s.L)} {_fmt(s.e_rel)}\n")


def _fit_lines(prefix, fit: DecayFit | None):
    if fit is None:
        return [f"{prefix}.model = Inconclusive"]
    return [f"{prefix}.model = {fit.model.value}",
            f"{prefix}.rate = {_fmt(fit.rate)}",
            f"{prefix}.r_squared = {_fmt(fit.r_squared)}",
            f"{prefix}.prefactor = {_fmt(fit.prefactor)}",
            f"{prefix}.conclusive = {str(fit.conclusive).lower()}"]


def emit_summary(result: RunResult, path, header=()):
    lines = list(header)
    for curve in result.curves:
        tag = curve.metadata.get("tag", f"k={curve.k!r}")
        lines += [f"[{tag}]"]
        lines += [f"{key} = {val}" for key, val in sorted(curve.metadata.items()) if key != "tag"]
        lines += _fit_lines("fit", result.fits.get(tag))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_manifest(result: RunResult, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("k", "L", "error"))
        for k, L, msg in sorted(result.failures, key=lambda f: (f[0], f[1])):
            w.writerow((repr(k), repr(L), msg))


def _config_header(cfg: RunConfig):
    return ["[config]"] + [f"{f.name} = {getattr(cfg, f.name)!r}"
                           for f in fields(cfg) if f.name != "threads"]


def _map(func, jobs, threads):
    if threads <= 1:
        return [func(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, jobs))


def _guarded(func):
    def run(job):
        try:
            return func(job), None
        except (ArithmeticError, ValueError, RuntimeError, QuadratureError,
                np.linalg.LinAlgError) as exc:
            return None, f"{type(exc).__name__}: {exc}"
    return run


# oracle study --------------------------------------------------------------

def _oracle_value(which, cfg: RunConfig, k, P):
    p = OracleParams(k, cfg.x2_star, P * (1 + 1j))
    use_mp = cfg.precision == "mp" or (cfg.precision == "auto" and (2 * k) % 1 != 0)
    if which == "w1":
        if use_mp:
            return w1_field_mp(cfg.point, p)
        return w1_field(cfg.point, p, tol=cfg.tol, allow_lattice=True)
    if use_mp or cfg.precision == "auto":
        # w0 decays like exp(-2k Im P); double precision cannot follow it
        return w0_field_mp(cfg.point, p)
    return w0_field(cfg.point, p, tol=cfg.tol)


def run_oracle_study(cfg: RunConfig, threads=None) -> RunResult:
    """|w0| and |w1| at ``cfg.point`` for every (k, P), with decay fits."""
    threads = cfg.threads if threads is None else threads
    jobs = [(which, k, P) for which in ("w1", "w0")
            for k in cfg.oracle_k_values for P in cfg.P_values]
    outcomes = _map(_guarded(lambda j: _oracle_value(j[0], cfg, j[1], j[2])), jobs, threads)
    result = RunResult()
    for which in ("w1", "w0"):
        for k in cfg.oracle_k_values:
            samples = []
            for (w, kk, P), (val, err) in zip(jobs, outcomes):
                if (w, kk) != (which, k):
                    continue
                if err is not None:
                    result.failures.append((k, P, f"{which}: {err}"))
                elif abs(val) > 0:
                    samples.append(Sample(P, P * (1 + 1j), abs(val)))
                else:
                    result.failures.append((k, P, f"{which}: exact zero"))
            tag = f"{which} k={k!r}"
            curve = SweepCurve(k, tuple(samples), {"tag": tag, "quantity": which,
                                                   "x": cfg.point, "x2_star": cfg.x2_star})
            result.curves.append(curve)
            result.fits[tag] = try_fit(curve)
    return result


# L sweep -------------------------------------------------------------------

def _solve_job(cfg: RunConfig):
    def solve(job):
        k, L = job
        return solve_scattering(cfg.solve_config(k, L))
    return solve


def run_sweep(cfg: RunConfig, threads=None) -> RunResult:
    """E_rel against the reference-L solution for every (k, L)."""
    threads = cfg.threads if threads is None else threads
    lref = cfg.reference_length
    # validate once up front so config errors do not become per-point failures
    for k in cfg.k_values:
        cfg.solve_config(k, lref)
    jobs = sorted({(k, L) for k in cfg.k_values for L in (*cfg.L_values, lref)})
    outcomes = dict(zip(jobs, _map(_guarded(_solve_job(cfg)), jobs, threads)))
    result = RunResult()
    for k in sorted(cfg.k_values):
        ref, ref_err = outcomes[(k, lref)]
        samples = []
        for L in cfg.L_values:
            field_, err = outcomes[(k, L)]
            if err is None and ref_err is not None:
                err = f"reference solve failed: {ref_err}"
            if err is None:
                try:
                    e = h1_relative_error(field_, ref, cfg.solve_config(k, L).region_d)
                except ValueError as exc:
                    err = f"{type(exc).__name__}: {exc}"
                else:
                    if e > 0:
                        samples.append(Sample(L, p_tilde(cfg.profile_for(L)), e))
                        continue
                    err = "zero error against the reference"
            result.failures.append((k, L, err))
        tag = f"k={k!r}"
        curve = SweepCurve(k, tuple(samples), {
            "tag": tag, "surface": cfg.surface, "resolution": cfg.resolution,
            "profile": cfg.profile, "reference_L": lref})
        segment = pre_floor(curve, cfg.floor)
        curve.metadata["fit_samples"] = len(segment.samples)
        result.curves.append(curve)
        result.fits[tag] = try_fit(segment)
    return result


def _stem(prefix, k):
    return f"{prefix}_k{k!r}"


def write_results(result: RunResult, cfg: RunConfig, out_dir, prefix):
    """CSV and gnuplot file per curve, summary.txt and, on failures, errors.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for curve in result.curves:
        stem = _stem(curve.metadata.get("quantity", prefix), curve.k)
        emit_csv(curve, out / f"{stem}.csv")
        emit_gnuplot(curve, out / f"{stem}.dat")
    emit_summary(result, out / f"{prefix}_summary.txt", _config_header(cfg))
    manifest = out / f"{prefix}_errors.csv"
    if result.failures:
        emit_manifest(result, manifest)
    elif manifest.exists():
        manifest.unlink()
    return out
