"""Experiment driver: single solves, refinement sweeps, spectra and reports."""
import csv
from dataclasses import asdict, dataclass, field, fields, replace
import json
import math
from pathlib import Path

import numpy as np

from .assembly import ScalingSpec
from .exceptions import RBFFDError, StageError
from .geometry import PolarCurve2D, make_domain
from .local_weights import LAPLACIAN, directional
from .nodes import spacing_for_count
from .pipeline import Discretization, NodeCache, inflow_tags, parse_method, prepare_nodes
from .problems import make_problem
from .solver import nullspace_count, numerical_rank, product_matrix

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_overrides",
    "SolveReport",
    "SweepReport",
    "build_discretization",
    "run_solve",
    "run_solves",
    "run_sweep",
    "run_h_sweep",
    "run_p_sweep",
    "run_q_sweep",
    "run_spectrum",
    "fit_rate",
    "h_for_count",
    "uniform_1d_nodes",
    "cardinal_trace",
    "voronoi_jump",
    "write_csv",
    "write_json",
    "DEFAULT_Q_LIST",
    "REPORT_COLUMNS",
]

DEFAULT_Q_LIST = (1.1, 1.3, 1.7, 2, 2.3, 2.7, 3, 3.3, 3.7, 4, 5, 6, 7, 8, 9, 10, 11)
ADVECTION_DIRECTION = (0.0, 1.0)


@dataclass
class ExperimentConfig:
    """All knobs of one run or sweep; list-valued fields drive sweeps."""

    domain: str = "star"
    domain_params: tuple = ()
    problem: tuple = ("rationalsine",)
    bc_mode: str = "mixed"
    method: str = "ls"
    p: int = 5
    phs_k: int = 2
    q: float = 3.0
    h: float = 0.05
    stencil_size: int = 0
    h_list: tuple = ()
    n_list: tuple = ()
    p_list: tuple = ()
    q_list: tuple = ()
    beta0: str = "inv_h"
    seed: int = 0
    output: str = "results"
    stability: bool = True
    boundary_laplacian: bool = False
    spectrum_which: str = "E_times_Dplus"
    spectrum_pde: str = "poisson"
    n_target: int = 200

    def validate(self):
        if self.p < 2:
            raise RBFFDError("p must be at least 2")
        if self.q < 1:
            raise RBFFDError("q must be at least 1")
        if not self.h > 0:
            raise RBFFDError("h must be positive")
        if any(b >= a for a, b in zip(self.h_list, self.h_list[1:])):
            raise RBFFDError("h values must be strictly decreasing")
        if any(v <= 0 for v in self.h_list):
            raise RBFFDError("h values must be positive")
        if any(v < 2 for v in self.p_list):
            raise RBFFDError("p values must be at least 2")
        if any(v < 1 for v in self.q_list):
            raise RBFFDError("q values must be at least 1")
        if self.bc_mode not in ("mixed", "dirichlet"):
            raise RBFFDError(f"unknown bc_mode {self.bc_mode!r}")
        if self.beta0 not in ("inv_h", "one"):
            raise RBFFDError(f"unknown beta0 rule {self.beta0!r}")
        if self.spectrum_which not in ("E_times_Dplus", "D_times_Eplus"):
            raise RBFFDError(f"unknown product ordering {self.spectrum_which!r}")
        if self.spectrum_pde not in ("poisson", "advection"):
            raise RBFFDError(f"unknown spectrum operator {self.spectrum_pde!r}")
        parse_method(self.method)
        for name in self.problem:
            make_problem(name)
        return self

    def to_dict(self):
        return asdict(self)


def _convert(name, text):
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in kinds:
        raise RBFFDError(f"unknown configuration key {name!r}")
    kind = kinds[name]
    text = text.strip()
    if kind in ("tuple", tuple):
        items = [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]
        if name == "problem":
            return tuple(items)
        if name in ("n_list", "p_list"):
            return tuple(int(float(t)) for t in items)
        return tuple(float(t) for t in items)
    if kind in ("int", int):
        return int(float(text))
    if kind in ("float", float):
        return float(text)
    if kind in ("bool", bool):
        low = text.lower()
        if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
            raise RBFFDError(f"{name} expects a boolean, got {text!r}")
        return low in ("1", "true", "yes", "on")
    return text


def parse_overrides(pairs):
    """``["key=value", ...]`` into typed configuration values."""
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise RBFFDError(f"override {pair!r} is not of the form key=value")
        k, v = pair.split("=", 1)
        k = k.strip().replace("-", "_")
        out[k] = _convert(k, v)
    return out


def load_config(path=None, overrides=None):
    """Read a ``key = value`` file (``#`` comments) and apply overrides."""
    values = {}
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise RBFFDError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            k = k.strip().replace("-", "_")
            values[k] = _convert(k, v)
    if isinstance(overrides, dict):
        values.update(overrides)
    else:
        values.update(parse_overrides(overrides))
    return ExperimentConfig(**values).validate()


REPORT_COLUMNS = (
    "problem", "method", "p", "q", "h", "inv_h", "N", "M", "error", "stability_norm",
    "kappa_D", "kappa_E", "r1", "r2", "status",
)


@dataclass
class SolveReport:
    """One row of a report; unavailable measurements are ``None``."""

    problem: str
    method: str
    p: int
    q: float
    h: float
    inv_h: float = None
    N: int = None
    M: int = None
    error: float = None
    stability_norm: float = None
    kappa_D: float = None
    kappa_E: float = None
    r1: float = None
    r2: float = None
    status: str = "ok"
    config: dict = field(default=None, repr=False)
    pointwise_error: np.ndarray = field(default=None, repr=False)
    exception: Exception = field(default=None, repr=False)

    def row(self):
        return {c: getattr(self, c) for c in REPORT_COLUMNS}

    def deterministic_row(self):
        """The row without timing columns."""
        r = self.row()
        r.pop("r1")
        r.pop("r2")
        return r


def _domain(config):
    return make_domain(config.domain, config.domain_params)


def build_discretization(config, cache=None):
    """Nodes and discretization of one configuration: ``(domain, X, Y, disc)``."""
    cache = cache or NodeCache()
    method = parse_method(config.method)
    q = 1.0 if method.collocation else config.q
    domain = _domain(config)
    X, Y = prepare_nodes(domain, config.h, q, method, config.seed, config.bc_mode, cache)
    disc = Discretization(domain, X, Y, config.p, method, ScalingSpec.from_rule(config.beta0, config.h),
                          phs_k=config.phs_k, stencil_size=config.stencil_size or None,
                          bc_mode=config.bc_mode, boundary_laplacian=config.boundary_laplacian or None)
    return domain, X, Y, disc


def run_solves(config, cache=None, problems=None):
    """Solve every configured problem on one shared discretization.

    Failures are captured in the ``status`` column rather than raised.
    """
    cache = cache or NodeCache()
    method = parse_method(config.method)
    problems = problems or config.problem
    q = 1.0 if method.collocation else config.q
    base = dict(method=method.name, p=config.p, q=q, h=config.h, inv_h=1.0 / config.h, config=config.to_dict())
    try:
        _, X, Y, disc = build_discretization(config, cache)
    except RBFFDError as exc:
        return [SolveReport(problem=name, status=_status(exc, "setup"), exception=_staged(exc, "setup"), **base)
                for name in problems]
    counts = dict(N=int(np.sum(~X.ghost_mask)), M=len(Y))
    stab = {}
    if config.stability:
        try:
            rep = disc.stability()
            stab = dict(stability_norm=rep.stability_norm, kappa_D=rep.kappa_D, kappa_E=rep.kappa_E)
        except RBFFDError as exc:
            stab = dict(status=_status(exc, "stability"), exception=_staged(exc, "stability"))
    out = []
    for name in problems:
        try:
            sol = disc.solve(make_problem(name))
            out.append(SolveReport(problem=name, error=sol.error, r1=disc.r1, r2=sol.r2,
                                   pointwise_error=sol.pointwise_error, **counts, **base, **stab))
        except RBFFDError as exc:
            extra = {k: v for k, v in stab.items() if k not in ("status", "exception")}
            out.append(SolveReport(problem=name, r1=disc.r1, status=_status(exc, "solve"),
                                   exception=_staged(exc, "solve"), **counts, **base, **extra))
    return out


def run_solve(config, cache=None):
    """Single solve of the first configured problem.

    Raises :class:`StageError` on failure so the command line can report the stage.
    """
    rep = run_solves(config, cache, problems=config.problem[:1])[0]
    if rep.exception is not None:
        raise rep.exception
    return rep


def _staged(exc, stage):
    return exc if isinstance(exc, StageError) else StageError(stage, exc)


def _status(exc, stage):
    return f"failed {_staged(exc, stage)}"


def fit_rate(h, err, window=None):
    """Observed order ``k`` in ``err ~ h**k``, fitted by least squares in log-log scale.

    Uses the finest ``max(4, ceil(n/2))`` finite points (all if fewer).
    Returns ``(k, rms residual)`` or ``(None, None)`` with fewer than 2 points.
    """
    h = np.asarray(h, dtype=float)
    err = np.asarray([np.nan if e is None else e for e in err], dtype=float)
    ok = np.isfinite(err) & (err > 0)
    h, err = h[ok], err[ok]
    order = np.argsort(-h)
    h, err = h[order], err[order]
    n = len(h)
    if n < 2:
        return None, None
    w = window or max(4, math.ceil(n / 2))
    h, err = h[-w:], err[-w:]
    A = np.column_stack([np.log(h), np.ones(len(h))])
    coef, *_ = np.linalg.lstsq(A, np.log(err), rcond=None)
    resid = np.log(err) - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid ** 2)))


@dataclass
class SweepReport:
    parameter: str
    rows: list
    rates: dict
    config: dict

    def summary(self):
        return {
            "parameter": self.parameter,
            "rates": {k: {"rate": r, "residual": s} for k, (r, s) in self.rates.items()},
            "rows": [r.row() for r in self.rows],
            "config": self.config,
        }


def h_for_count(domain, target, seed=0, bc_mode="mixed", cache=None):
    """Spacing whose generated node set has about ``target`` nodes (one correction step)."""
    cache = cache or NodeCache()
    h0 = spacing_for_count(domain, target)
    X = cache.trial(domain, h0, seed, bc_mode)
    return float(h0 * (len(X) / target) ** (1.0 / domain.dim))


def run_sweep(config, parameter, values=None, cache=None):
    """One report row per (value, problem); rates are fitted for h sweeps."""
    cache = cache or NodeCache()
    if parameter == "h":
        if values is None:
            if config.h_list:
                values = config.h_list
            elif config.n_list:
                dom = _domain(config)
                values = [h_for_count(dom, n, config.seed, config.bc_mode, cache) for n in config.n_list]
            else:
                raise RBFFDError("h sweep needs h_list or n_list")
    elif values is None:
        values = config.p_list if parameter == "p" else config.q_list
    if not len(values):
        raise RBFFDError(f"empty {parameter} sweep")
    rows = []
    for v in values:
        cfg = replace(config, **{parameter: type(getattr(config, parameter))(v)})
        rows.extend(run_solves(cfg, cache))
    rates = {}
    if parameter == "h":
        for name in config.problem:
            sel = [r for r in rows if r.problem == name]
            rates[name] = fit_rate([r.h for r in sel], [r.error for r in sel])
    return SweepReport(parameter, rows, rates, config.to_dict())


def run_h_sweep(config, cache=None):
    return run_sweep(config, "h", cache=cache)


def run_p_sweep(config, cache=None):
    return run_sweep(config, "p", cache=cache)


def run_q_sweep(config, cache=None):
    return run_sweep(config, "q", values=config.q_list or DEFAULT_Q_LIST, cache=cache)


def run_spectrum(config, q_values=None, out_dir=None, cache=None):
    """Eigenvalues of the product matrix for each ``q``.

    Returns one summary dict per ``q``; with ``out_dir`` the eigenvalues are
    written as ``re im`` lines, one file per (operator, q).
    """
    cache = cache or NodeCache()
    domain = _domain(config)
    q_values = q_values or config.q_list or (1.0, 2.0, 3.0)
    h = h_for_count(domain, config.n_target, config.seed, config.bc_mode, cache)
    method = parse_method("ls")
    measures = None
    pde = LAPLACIAN
    if config.spectrum_pde == "advection":
        if not isinstance(domain, PolarCurve2D):
            raise StageError("spectrum", RBFFDError("advection spectra need a polar 2D domain"))
        g = np.array(ADVECTION_DIRECTION)
        pde = directional(-g)
        # inflow Dirichlet part is the upper half theta in [0, pi]
        measures = (domain.boundary_measures("mixed")[1], 0.0)
    out = []
    for q in q_values:
        X, Y = prepare_nodes(domain, h, q, method, config.seed, config.bc_mode, cache)
        if config.spectrum_pde == "advection":
            X, Y = inflow_tags(X), inflow_tags(Y)
        try:
            disc = Discretization(domain, X, Y, config.p, method, ScalingSpec.from_rule(config.beta0, h),
                                  phs_k=config.phs_k, bc_mode=config.bc_mode, pde_operator=pde,
                                  measures=measures)
            P = product_matrix(disc.operator.E, disc.operator.Dbar, config.spectrum_which)
            eig = np.linalg.eigvals(P)
            rank = numerical_rank(P)
        except RBFFDError as exc:
            raise StageError("spectrum", exc) from exc
        rec = {
            "q": float(q),
            "N": len(X),
            "M": len(Y),
            "nullspace": nullspace_count(eig),
            "rank": rank,
            "real_min": float(eig.real.min()),
            "real_max": float(eig.real.max()),
            "operator": config.spectrum_pde,
            "which": config.spectrum_which,
            "eigenvalues": eig,
        }
        if out_dir is not None:
            path = Path(out_dir) / f"eig_{config.spectrum_pde}_{config.spectrum_which}_q{q:g}.txt"
            path.parent.mkdir(parents=True, exist_ok=True)
            np.savetxt(path, np.column_stack([eig.real, eig.imag]), fmt="%.17g")
            rec["file"] = str(path)
        out.append(rec)
    return out


def uniform_1d_nodes(h, left=0.0, right=1.0, center=0.5):
    """Uniform 1D nodes with spacing ``h`` placed so that ``center`` is a cell midpoint."""
    k_lo = math.floor((left - center) / h - 0.5)
    k_hi = math.ceil((right - center) / h - 0.5)
    return center + (np.arange(k_lo, k_hi + 1) + 0.5) * h


def cardinal_trace(h=0.1, p=3, n=7, j=None, samples=2001, phs_k=2):
    """Cardinal function ``Psi_j`` of uniform 1D nodes on [0, 1] sampled on a fine grid."""
    from .estimators import RBFFDInterpolator

    x = uniform_1d_nodes(h)
    j = len(x) // 2 if j is None else int(j)
    interp = RBFFDInterpolator(p=p, phs_k=phs_k, stencil_size=n).fit(x[:, None], np.zeros(len(x)))
    t = np.linspace(x[0], x[-1], samples)
    return t, interp.cardinal(t[:, None], j), x


def voronoi_jump(h, p=3, n=7, func=np.sin, edge=0.5, phs_k=2):
    """Jump of ``I_h func`` across the Voronoi edge at ``edge`` (a node midpoint)."""
    from .estimators import RBFFDInterpolator

    x = uniform_1d_nodes(h, center=edge)
    interp = RBFFDInterpolator(p=p, phs_k=phs_k, stencil_size=n).fit(x[:, None], func(x))
    left = int(np.argmin(np.where(x < edge, edge - x, np.inf)))
    right = left + 1
    y = np.array([[edge]])
    return float(abs(interp.predict(y, stencil=left)[0] - interp.predict(y, stencil=right)[0]))


def _clean(v):
    if v is None:
        return None
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _cell(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "null"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(rows, path):
    """Report rows with the full column set; missing values are written as ``null``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            d = r.row() if isinstance(r, SolveReport) else r
            w.writerow([_cell(d.get(c)) for c in REPORT_COLUMNS])
    return path


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path
