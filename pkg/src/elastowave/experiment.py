"""Monte Carlo convergence studies, energy traces and Hölder diagnostics.

Every sample is an independent unit of work keyed by its index.  Results
are merged in sample order, so aggregates do not depend on the number of
workers.  Reported errors are root-mean-square over samples.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .assembly import BilinearForms, assemble_forms
from .linalg import spmv
from .mesh import Mesh, locate_points, uniform_triangulation
from .model import ModelSpec
from .noise import coarsen, generate_path, steps_for
from .stepper import StepFailure, init_state, make_step_operator, run

FAILURE_THRESHOLD = 0.01
HOLDER_WINDOW = (0.1, 0.9)


@dataclass(frozen=True)
class ConvergenceConfig:
    """Inputs of a temporal or spatial study.

    Temporal mode uses ``mesh_n``, ``k_list`` and ``k_ref``; spatial mode
    uses ``mesh_list``, ``mesh_ref`` and the fixed step ``k``.
    """

    mode: str
    spec: ModelSpec
    samples: int
    master_seed: int = 0
    mesh_n: Optional[int] = None
    k_list: Sequence[float] = ()
    k_ref: Optional[float] = None
    mesh_list: Sequence[int] = ()
    mesh_ref: Optional[int] = None
    k: Optional[float] = None

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if self.mode == "temporal":
            if self.mesh_n is None or self.k_ref is None or not self.k_list:
                raise ValueError("temporal mode needs mesh_n, k_list and k_ref")
            steps_for(self.spec.T, self.k_ref)
            for k in self.k_list:
                steps_for(self.spec.T, k)
                ratio = k / self.k_ref
                if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-9:
                    raise ValueError(f"k_ref={self.k_ref} does not divide k={k}")
        elif self.mode == "spatial":
            if self.k is None or self.mesh_ref is None or not self.mesh_list:
                raise ValueError("spatial mode needs k, mesh_list and mesh_ref")
            steps_for(self.spec.T, self.k)
            for n in self.mesh_list:
                q = self.mesh_ref / n
                if q != int(q) or q < 1 or (int(q) & (int(q) - 1)):
                    raise ValueError(
                        f"mesh_ref={self.mesh_ref} is not a power-of-two multiple of mesh_n={n}")
        else:
            raise ValueError(f"mode must be 'temporal' or 'spatial', got {self.mode!r}")


@dataclass(frozen=True)
class ErrorRecord:
    k: float
    h: float
    e_L2_u: float
    e_H1_u: float
    e_L2_v: float
    order_L2_u: Optional[float] = None
    order_H1_u: Optional[float] = None
    order_L2_v: Optional[float] = None


@dataclass
class ConvergenceReport:
    mode: str
    records: list[ErrorRecord]
    samples: int
    failed: int
    valid: bool
    # per-sample squared norms, shape (samples_ok, n_resolutions, 3)
    squared: np.ndarray = field(repr=False, default=None)
    metadata: dict = field(default_factory=dict)

    def fitted_orders(self) -> dict[str, float]:
        """Least-squares slopes of log(error) against log(resolution)."""
        res = [r.k if self.mode == "temporal" else r.h for r in self.records]
        return {
            name: fit_order([getattr(r, name) for r in self.records], res)
            for name in ("e_L2_u", "e_H1_u", "e_L2_v")
        }

    def confidence_halfwidths(self) -> np.ndarray:
        """95% normal-approximation half-widths on the mean squared errors."""
        s = self.squared
        if s is None or len(s) < 2:
            return np.full((len(self.records), 3), np.nan)
        return 1.96 * s.std(axis=0, ddof=1) / math.sqrt(len(s))


@dataclass
class EnergyTrace:
    t: np.ndarray
    mean_J: np.ndarray
    per_sample: Optional[np.ndarray] = field(default=None, repr=False)
    failed: int = 0


@dataclass
class HolderReport:
    lags: np.ndarray
    m_u: np.ndarray
    m_v: np.ndarray
    slope_u: float
    slope_v: float
    samples: int
    failed: int = 0
    metadata: dict = field(default_factory=dict)


def estimate_orders(errors, resolutions) -> list[Optional[float]]:
    """Pairwise orders ``log(e[i-1]/e[i]) / log(r[i-1]/r[i])``.

    The first entry is ``None``; a pair with a nonpositive error gives NaN.
    """
    e = [float(x) for x in errors]
    r = [float(x) for x in resolutions]
    if len(e) != len(r) or len(e) < 2:
        raise ValueError("need two or more (error, resolution) pairs of equal length")
    if any(x <= 0 for x in r):
        raise ValueError("resolutions must be positive")
    out: list[Optional[float]] = [None]
    for i in range(1, len(e)):
        if e[i - 1] <= 0 or e[i] <= 0:
            out.append(math.nan)
        else:
            out.append(math.log(e[i - 1] / e[i]) / math.log(r[i - 1] / r[i]))
    return out


def fit_order(errors, resolutions) -> float:
    e = np.asarray(errors, dtype=float)
    r = np.asarray(resolutions, dtype=float)
    if np.any(e <= 0):
        return math.nan
    return float(np.polyfit(np.log(r), np.log(e), 1)[0])


def interpolate_to_mesh(coarse_mesh: Mesh, coarse_dofs, fine_mesh: Mesh) -> np.ndarray:
    """Evaluate a P1 field of ``coarse_mesh`` at the nodes of ``fine_mesh``."""
    vals = np.asarray(coarse_dofs, dtype=float).reshape(-1, 2)
    tri, bary = locate_points(coarse_mesh, fine_mesh.nodes)
    nodal = vals[coarse_mesh.triangles[tri]]
    return np.einsum("pa,pac->pc", bary, nodal).reshape(-1)


# --- per-process caches; workers rebuild these once -----------------------

@lru_cache(maxsize=8)
def _forms(n: int, lam: float, mu: float) -> BilinearForms:
    return assemble_forms(uniform_triangulation(n), lam, mu)


@lru_cache(maxsize=16)
def _operator(n: int, lam: float, mu: float, k: float):
    return make_step_operator(_forms(n, lam, mu), k)


_INIT: dict = {}


def _initial(spec: ModelSpec, n: int):
    key = (spec, n)
    if key not in _INIT or spec.initial_kind == "custom":
        f = _forms(n, spec.lam, spec.mu)
        _INIT[key] = init_state(f.mesh, f, spec)
    return _INIT[key]


def _sq_norms(forms: BilinearForms, du, dv) -> tuple[float, float, float]:
    return (float(du @ spmv(forms.M, du)), float(du @ spmv(forms.K, du)),
            float(dv @ spmv(forms.M, dv)))


def _temporal_sample(args):
    cfg, j = args
    spec = cfg.spec
    lam, mu = spec.lam, spec.mu
    forms = _forms(cfg.mesh_n, lam, mu)
    s0 = _initial(spec, cfg.mesh_n)
    path = generate_path(cfg.master_seed, j, spec.T, cfg.k_ref)
    try:
        ref = run(_operator(cfg.mesh_n, lam, mu, cfg.k_ref), s0, path.increments, spec)
        out = []
        for k in cfg.k_list:
            factor = int(round(k / cfg.k_ref))
            sk = run(_operator(cfg.mesh_n, lam, mu, k), s0, coarsen(path, factor), spec)
            out.append(_sq_norms(forms, ref.u - sk.u, ref.v - sk.v))
    except StepFailure:
        return None
    return out


def _spatial_sample(args):
    cfg, j = args
    spec = cfg.spec
    lam, mu = spec.lam, spec.mu
    path = generate_path(cfg.master_seed, j, spec.T, cfg.k)
    ref_forms = _forms(cfg.mesh_ref, lam, mu)
    try:
        ref = run(_operator(cfg.mesh_ref, lam, mu, cfg.k), _initial(spec, cfg.mesh_ref),
                  path.increments, spec)
        out = []
        for n in cfg.mesh_list:
            s = run(_operator(n, lam, mu, cfg.k), _initial(spec, n), path.increments, spec)
            m = _forms(n, lam, mu).mesh
            du = ref.u - interpolate_to_mesh(m, s.u, ref_forms.mesh)
            dv = ref.v - interpolate_to_mesh(m, s.v, ref_forms.mesh)
            out.append(_sq_norms(ref_forms, du, dv))
    except StepFailure:
        return None
    return out


def map_samples(fn, cfg, samples: int, workers: int = 1) -> list:
    """Apply ``fn((cfg, j))`` for ``j < samples``; results are in sample order."""
    jobs = [(cfg, j) for j in range(samples)]
    if workers <= 1:
        return [fn(a) for a in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, samples // (4 * workers))))


def _report(cfg: ConvergenceConfig, results: list, resolutions) -> ConvergenceReport:
    ok = [r for r in results if r is not None]
    failed = len(results) - len(ok)
    sq = np.array(ok, dtype=float).reshape(len(ok), len(resolutions), 3)
    rms = np.sqrt(sq.mean(axis=0)) if ok else np.full((len(resolutions), 3), np.nan)
    res_axis = [r[0] if cfg.mode == "temporal" else r[1] for r in resolutions]
    if len(resolutions) >= 2:
        orders = [estimate_orders(rms[:, c], res_axis) for c in range(3)]
    else:
        orders = [[None]] * 3
    records = [
        ErrorRecord(k=k, h=h, e_L2_u=rms[i, 0], e_H1_u=rms[i, 1], e_L2_v=rms[i, 2],
                    order_L2_u=orders[0][i], order_H1_u=orders[1][i], order_L2_v=orders[2][i])
        for i, (k, h) in enumerate(resolutions)
    ]
    return ConvergenceReport(
        mode=cfg.mode, records=records, samples=len(ok), failed=failed,
        valid=failed <= FAILURE_THRESHOLD * len(results), squared=sq,
        metadata={"error_estimator": "sqrt(mean over samples of squared norm)",
                  "requested_samples": cfg.samples, "master_seed": cfg.master_seed},
    )


def temporal_convergence(cfg: ConvergenceConfig, workers: int = 1) -> ConvergenceReport:
    if cfg.mode != "temporal":
        raise ValueError("config is not in temporal mode")
    results = map_samples(_temporal_sample, cfg, cfg.samples, workers)
    h = 1.0 / cfg.mesh_n
    return _report(cfg, results, [(k, h) for k in cfg.k_list])


def spatial_convergence(cfg: ConvergenceConfig, workers: int = 1) -> ConvergenceReport:
    if cfg.mode != "spatial":
        raise ValueError("config is not in spatial mode")
    results = map_samples(_spatial_sample, cfg, cfg.samples, workers)
    return _report(cfg, results, [(cfg.k, 1.0 / n) for n in cfg.mesh_list])


@dataclass(frozen=True)
class _TraceJob:
    spec: ModelSpec
    mesh_n: int
    k: float
    master_seed: int


def _trace_sample(args):
    job, j = args
    spec = job.spec
    forms = _forms(job.mesh_n, spec.lam, spec.mu)
    s0 = _initial(spec, job.mesh_n)
    path = generate_path(job.master_seed, j, spec.T, job.k)

    def row(s):
        Mu, Mv = spmv(forms.M, s.u), spmv(forms.M, s.v)
        return (0.5 * (float(s.v @ Mv) + float(s.u @ spmv(forms.A, s.u))),
                float(s.u @ Mu), float(s.v @ Mv))

    rows = [row(s0)]
    try:
        run(_operator(job.mesh_n, spec.lam, spec.mu, job.k), s0, path.increments, spec,
            callback=lambda s: rows.append(row(s)))
    except StepFailure:
        return None
    return rows


def _traces(spec, mesh_n, k, samples, seed, workers):
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n_steps = steps_for(spec.T, k)
    results = map_samples(_trace_sample, _TraceJob(spec, mesh_n, k, seed), samples, workers)
    ok = np.array([r for r in results if r is not None], dtype=float).reshape(-1, n_steps + 1, 3)
    return np.arange(n_steps + 1) * k, ok, len(results) - len(ok)


def energy_trace(spec: ModelSpec, mesh_n: int, k: float, samples: int, seed: int = 0,
                 workers: int = 1, keep_samples: bool = False) -> EnergyTrace:
    """Per-step sample mean of the discrete energy."""
    t, ok, failed = _traces(spec, mesh_n, k, samples, seed, workers)
    J = ok[:, :, 0]
    mean = J.mean(axis=0) if len(J) else np.full(t.size, np.nan)
    return EnergyTrace(t, mean, J if keep_samples else None, failed)


@dataclass
class RunSummary:
    t: np.ndarray
    mean_J: np.ndarray
    rms_L2_u: np.ndarray
    rms_L2_v: np.ndarray
    samples: int
    failed: int


def run_summary(spec: ModelSpec, mesh_n: int, k: float, samples: int, seed: int = 0,
                workers: int = 1) -> RunSummary:
    """Mean energy and RMS L2 norms of u and v at every step."""
    t, ok, failed = _traces(spec, mesh_n, k, samples, seed, workers)
    m = ok.mean(axis=0) if len(ok) else np.full((t.size, 3), np.nan)
    return RunSummary(t, m[:, 0], np.sqrt(m[:, 1]), np.sqrt(m[:, 2]), len(ok), failed)


def _holder_lags(lags, k_fine):
    steps = []
    for lag in lags:
        q = lag / k_fine
        if abs(q - round(q)) > 1e-9 or round(q) < 1:
            raise ValueError(f"lag {lag} is not a positive multiple of k_fine={k_fine}")
        steps.append(int(round(q)))
    return steps


def _holder_sample(args):
    (job, lag_steps), j = args
    spec = job.spec
    forms = _forms(job.mesh_n, spec.lam, spec.mu)
    s0 = _initial(spec, job.mesh_n)
    path = generate_path(job.master_seed, j, spec.T, job.k)
    us, vs = [s0.u], [s0.v]

    def keep(s):
        us.append(s.u)
        vs.append(s.v)

    try:
        run(_operator(job.mesh_n, spec.lam, spec.mu, job.k), s0, path.increments, spec, keep)
    except StepFailure:
        return None
    n_steps = len(us) - 1
    lo = int(math.ceil(HOLDER_WINDOW[0] * n_steps - 1e-9))
    hi = int(math.floor(HOLDER_WINDOW[1] * n_steps + 1e-9))
    U, V = np.array(us), np.array(vs)
    out = []
    for L in lag_steps:
        anchors = np.arange(lo, min(hi, n_steps - L) + 1)
        du = U[anchors + L] - U[anchors]
        dv = V[anchors + L] - V[anchors]
        mu_ = np.mean([d @ spmv(forms.M, d) for d in du])
        mv_ = np.mean([d @ spmv(forms.M, d) for d in dv])
        out.append((mu_, mv_))
    return out


def holder_diagnostic(spec: ModelSpec, mesh_n: int, k_fine: float, samples: int, lags,
                      seed: int = 0, workers: int = 1) -> HolderReport:
    """Mean squared L2 increments of u and v against the lag, with log-log slopes.

    ``lags`` are times (multiples of ``k_fine``).  Anchor times are taken in
    ``[0.1 T, 0.9 T]``.
    """
    lags = [float(x) for x in lags]
    if len(lags) < 3:
        raise ValueError("need at least three lags")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    steps_for(spec.T, k_fine)
    lag_steps = _holder_lags(lags, k_fine)
    job = (_TraceJob(spec, mesh_n, k_fine, seed), tuple(lag_steps))
    results = map_samples(_holder_sample, job, samples, workers)
    ok = np.array([r for r in results if r is not None], dtype=float)
    m = ok.mean(axis=0)
    tau = np.array(lags)
    return HolderReport(
        lags=tau, m_u=m[:, 0], m_v=m[:, 1],
        slope_u=fit_order(m[:, 0], tau), slope_v=fit_order(m[:, 1], tau),
        samples=len(ok), failed=len(results) - len(ok),
        metadata={"anchor_window": [HOLDER_WINDOW[0] * spec.T, HOLDER_WINDOW[1] * spec.T]},
    )


def as_fraction(x: float) -> str:
    """Short rational rendering of a step size, e.g. 0.02 -> '1/50'."""
    return str(Fraction(x).limit_denominator(100000))
