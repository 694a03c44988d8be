"""Synthetic convergence experiments at configurable scale.

Each experiment draws ``trials`` independent (dictionary, signal) pairs from
seeds derived from ``base_seed``, runs Frank-Wolfe, and aggregates
``log ||r_k||_2`` across trials.  Results go to ``out_dir`` as CSV (the
record), SVG (a view of the CSV) and ``metadata.json``.

Conventions:

* a run that stops early keeps its last residual for the remaining
  iterations (the iterate no longer moves);
* ``log 0`` is clipped at ``log(1e-16 ||y||_2)``, and the number of clipped
  values is written to the metadata;
* the theoretical line of a trial is ``log ||y|| + k/2 log(1 - theta)``.  Max
  curves are compared to the pointwise maximum of the per-trial lines, mean
  curves to their pointwise mean.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dictionary import analyze, new_dictionary
from .exceptions import ConfigError, SparsityExceedsN
from .pursuit import FwConfig, PursuitConfig, fw_solve, mp_solve, omp_solve
from .svgplot import Series, line_chart
from .synth import SynthConfig, gen_dictionary, gen_instance, trial_seeds
from .theory import log_bound_line, theta as theta_fn, validate_trace

log = logging.getLogger(__name__)

CSV_VERSION = 1
CLIP_FACTOR = 1e-16


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 500
    n: int = 1000
    trials: int = 50
    m_mult: tuple[float, ...] = (1,)
    beta_mult: tuple[float, ...] = (8.0,)
    beta_abs: float | None = None
    max_iters: int = 300
    base_seed: int = 0
    out_dir: str = "results"
    jobs: int = 1

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise ConfigError("d and n must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not self.m_mult:
            raise ConfigError("at least one sparsity multiplier is required")
        if not self.beta_mult and self.beta_abs is None:
            raise ConfigError("at least one beta multiplier is required")
        if any(c <= 0 for c in self.m_mult) or any(b <= 0 for b in self.beta_mult):
            raise ConfigError("multipliers must be positive")
        if self.beta_abs is not None and self.beta_abs <= 0:
            raise ConfigError("absolute beta must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    @classmethod
    def full_scale(cls, **kw) -> "ExperimentConfig":
        return cls(**{"d": 10000, "n": 20000, "trials": 2000, "max_iters": 300, **kw})


@dataclass
class AggregateCurve:
    k: np.ndarray
    mean: np.ndarray
    max: np.ndarray
    bound: np.ndarray | None = None       # pointwise max of per-trial lines
    mean_bound: np.ndarray | None = None  # pointwise mean of per-trial lines
    clipped: int = 0
    trials: int = 0


@dataclass
class ExperimentResult:
    name: str
    curves: dict[str, AggregateCurve]
    metadata: dict = field(default_factory=dict)
    files: list[str] = field(default_factory=list)


# -- per-trial work -----------------------------------------------------------


def _log_curve(trace, y_l2: float, length: int) -> tuple[np.ndarray, int]:
    rn = trace.residual_norms()
    if rn.size < length:
        rn = np.concatenate([rn, np.full(length - rn.size, rn[-1])])
    rn = rn[:length]
    floor = CLIP_FACTOR * y_l2
    clipped = int(np.count_nonzero(rn < floor))
    return np.log(np.maximum(rn, floor)), clipped


def _sparsity(mult: float, m_star: int) -> int:
    return int(round(mult * m_star))


def run_trial(task: dict) -> dict:
    """One dictionary, one signal per sparsity multiplier, one FW run per beta.

    ``task`` is a plain dict so it can cross process boundaries.
    """
    d, n, max_iters = task["d"], task["n"], task["max_iters"]
    dict_seed, signal_seed = task["dict_seed"], task["signal_seed"]
    D = gen_dictionary(SynthConfig(d, n, 0, dict_seed, signal_seed))
    if task.get("orthonormal"):
        # test hook: orthonormalize the square Gaussian draw
        if d != n:
            raise ConfigError("orthonormal dictionaries need d == n")
        D = new_dictionary(np.linalg.qr(D.data)[0], normalize=True)
    metrics = analyze(D)
    ms = metrics.m_star
    out = {"trial": task["trial"], "coherence": metrics.coherence, "m_star": ms,
           "dict_seed": dict_seed, "signal_seed": signal_seed, "runs": []}
    for c in task["m_mult"]:
        m = _sparsity(c, ms)
        if m > n or m < 1:
            out["runs"].append({"m_mult": c, "m": m, "skipped": True})
            continue
        inst = gen_instance(D, SynthConfig(d, n, m, dict_seed, signal_seed))
        betas = [("abs", task["beta_abs"])] if task["beta_abs"] is not None else []
        betas += [(b, b * inst.l1_coeff_norm) for b in task["beta_mult"]]
        for tag, beta in betas:
            trace = fw_solve(D, inst.signal, FwConfig(beta, max_iters=max_iters))
            curve, clipped = _log_curve(trace, inst.l2_signal_norm, max_iters + 1)
            th = None
            if m <= ms and m - 1 < len(metrics.babel) and inst.l1_coeff_norm <= beta:
                th = theta_fn(metrics.mu1(m - 1), m, inst.l1_coeff_norm, beta)
            rep = validate_trace(trace, inst, metrics, beta)
            out["runs"].append({
                "m_mult": c, "m": m, "beta_mult": tag, "beta": beta, "skipped": False,
                "y_l2": inst.l2_signal_norm, "x_l1": inst.l1_coeff_norm, "theta": th,
                "K_detected": rep.K_detected, "off_support": rep.off_support_selections,
                "n_iter": trace.n_iter, "curve": curve, "clipped": clipped,
            })
    return out


def _tasks(cfg: ExperimentConfig) -> list[dict]:
    tasks = []
    for t in range(cfg.trials):
        ds, ss = trial_seeds(cfg.base_seed, t)
        tasks.append({"trial": t, "d": cfg.d, "n": cfg.n, "max_iters": cfg.max_iters,
                      "dict_seed": ds, "signal_seed": ss, "m_mult": list(cfg.m_mult),
                      "beta_mult": list(cfg.beta_mult), "beta_abs": cfg.beta_abs})
    return tasks


def _map(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def aggregate(runs: list[dict], length: int, with_bound: bool = True) -> AggregateCurve:
    curves = np.array([r["curve"] for r in runs])
    k = np.arange(length)
    agg = AggregateCurve(k=k, mean=curves.mean(axis=0), max=curves.max(axis=0),
                         clipped=sum(r["clipped"] for r in runs), trials=len(runs))
    if with_bound and all(r["theta"] is not None for r in runs):
        lines = np.array([log_bound_line(r["y_l2"], r["theta"], k) for r in runs])
        agg.bound = lines.max(axis=0)
        agg.mean_bound = lines.mean(axis=0)
    return agg


def fitted_slope(curve: np.ndarray, last_half: bool = False, settle: float = 1.0) -> float:
    """Least-squares slope of ``curve`` over its active part.

    The active part ends at the first iteration where the curve comes within
    ``settle`` (natural-log units) of its final value, i.e. before the runs
    have parked at their stopping residual.  ``last_half`` restricts the fit
    to the second half of that window.
    """
    curve = np.asarray(curve, dtype=np.float64)
    near = np.flatnonzero(np.abs(curve - curve[-1]) <= settle)
    end = int(near[0]) if near.size else curve.size - 1
    end = max(end, 1)
    start = end // 2 if last_half else 0
    if end - start < 1:
        start = end - 1
    ks = np.arange(start, end + 1, dtype=np.float64)
    return float(np.polyfit(ks, curve[start:end + 1], 1)[0])


# -- output -------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{float(v):.17g}"


def write_csv(path: Path, name: str, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    rows = zip(*columns.values())
    with open(path, "w", newline="") as fh:
        fh.write(f"# fwsparse {name} v{CSV_VERSION}: {','.join(names)}\n")
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(str(int(v)) if j == 0 else _fmt(v) for j, v in enumerate(row)) + "\n")


def _write_meta(path: Path, cfg: ExperimentConfig, results: list[dict], extra: dict) -> dict:
    meta = {
        "library_version": __version__,
        "config": {**asdict(cfg), "m_mult": list(cfg.m_mult), "beta_mult": list(cfg.beta_mult)},
        "log_clip": {"floor": f"log({CLIP_FACTOR:g} * ||y||_2)"},
        "dictionaries": [{"trial": r["trial"], "dict_seed": r["dict_seed"],
                          "signal_seed": r["signal_seed"], "coherence": r["coherence"],
                          "m_star": r["m_star"]} for r in results],
        **extra,
    }
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta


def _prepare(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _runs(results, **match) -> list[dict]:
    sel = []
    for r in results:
        for run in r["runs"]:
            if all(run.get(k) == v for k, v in match.items()):
                sel.append(run)
    return sel


# -- the experiments ----------------------------------------------------------


def exp1_convergence(cfg: ExperimentConfig) -> ExperimentResult:
    """Mean and max of ``log ||r_k||`` at ``m = m*`` against the theoretical line."""
    cfg = replace(cfg, m_mult=(1,), beta_abs=None,
                  beta_mult=cfg.beta_mult[:1] if cfg.beta_mult else (8.0,))
    out = _prepare(cfg)
    results = _map(run_trial, _tasks(cfg), cfg.jobs)
    runs = _runs(results, skipped=False)
    agg = aggregate(runs, cfg.max_iters + 1)
    cols = {"k": agg.k, "mean_log_r": agg.mean, "max_log_r": agg.max,
            "bound_log_r": agg.bound, "mean_bound_log_r": agg.mean_bound}
    write_csv(out / "curves.csv", "exp1", cols)
    series = [Series("mean", list(agg.k), list(agg.mean)),
              Series("max", list(agg.k), list(agg.max))]
    if agg.bound is not None:
        series.append(Series("theoretical bound", list(agg.k), list(agg.bound), "dashed"))
    (out / "fig1.svg").write_text(line_chart(
        series, f"log ||r_k|| over {cfg.trials} trials, beta = {cfg.beta_mult[0]:g} ||x*||_1, m = m*",
        "iteration k", "log ||r_k||_2"))
    meta = _write_meta(out / "metadata.json", cfg, results, {
        "experiment": "exp1", "clipped_values": agg.clipped,
        "bound_aggregation": "bound_log_r = pointwise max of per-trial lines; "
                             "mean_bound_log_r = pointwise mean",
        "K_detected": [r["K_detected"] for r in runs],
    })
    return ExperimentResult("exp1", {"exp1": agg}, meta,
                            [str(out / f) for f in ("curves.csv", "fig1.svg", "metadata.json")])


def exp2_sparsity_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Max of ``log ||r_k||`` for ``m = c m*`` with each multiplier ``c``."""
    if not cfg.m_mult:
        raise ConfigError("empty multiplier list")
    cfg = replace(cfg, beta_abs=None, beta_mult=cfg.beta_mult[:1] if cfg.beta_mult else (8.0,))
    out = _prepare(cfg)
    results = _map(run_trial, _tasks(cfg), cfg.jobs)
    cols = {"k": np.arange(cfg.max_iters + 1)}
    curves, skipped, series = {}, [], []
    for j, c in enumerate(cfg.m_mult):
        runs = _runs(results, m_mult=c, skipped=False)
        n_skip = len(_runs(results, m_mult=c, skipped=True))
        if n_skip:
            msg = f"m = {c:g} m* exceeds n={cfg.n} in {n_skip} trial(s); skipped"
            log.warning(msg)
            skipped.append({"m_mult": c, "trials_skipped": n_skip, "reason": str(SparsityExceedsN(msg))})
        if not runs:
            continue
        agg = aggregate(runs, cfg.max_iters + 1, with_bound=False)
        curves[f"m_{c:g}"] = agg
        cols[f"max_log_r_m{c:g}"] = agg.max
        series.append(Series(f"m = {c:g} m*", list(agg.k), list(agg.max),
                             ("solid", "dashed", "dotted")[j % 3]))
    write_csv(out / "curves.csv", "exp2", cols)
    (out / "fig2.svg").write_text(line_chart(
        series, f"max log ||r_k|| over {cfg.trials} trials, beta = {cfg.beta_mult[0]:g} ||x*||_1",
        "iteration k", "log ||r_k||_2"))
    meta = _write_meta(out / "metadata.json", cfg, results, {
        "experiment": "exp2", "skipped": skipped,
        "clipped_values": {k: v.clipped for k, v in curves.items()},
        "slopes_last_half": {k: fitted_slope(v.max, last_half=True) for k, v in curves.items()},
    })
    return ExperimentResult("exp2", curves, meta,
                            [str(out / f) for f in ("curves.csv", "fig2.svg", "metadata.json")])


def exp3_beta_effect(cfg: ExperimentConfig) -> ExperimentResult:
    """Mean ``log ||r_k||`` at ``m = m*`` for two l1 radii, with both theory lines."""
    cfg = replace(cfg, m_mult=(1,), beta_abs=None,
                  beta_mult=cfg.beta_mult if len(cfg.beta_mult) >= 2 else (1.1, 8.0))
    out = _prepare(cfg)
    results = _map(run_trial, _tasks(cfg), cfg.jobs)
    cols = {"k": np.arange(cfg.max_iters + 1)}
    curves, series = {}, []
    for j, b in enumerate(cfg.beta_mult):
        runs = _runs(results, beta_mult=b, skipped=False)
        agg = aggregate(runs, cfg.max_iters + 1)
        curves[f"beta_{b:g}"] = agg
        cols[f"mean_log_r_b{b:g}"] = agg.mean
        cols[f"bound_log_r_b{b:g}"] = agg.mean_bound
        color = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")[j % 4]
        series.append(Series(f"mean, beta = {b:g} ||x*||_1", list(agg.k), list(agg.mean), color=color))
        if agg.mean_bound is not None:
            series.append(Series(f"bound, beta = {b:g} ||x*||_1", list(agg.k),
                                 list(agg.mean_bound), "dashed", color))
    write_csv(out / "curves.csv", "exp3", cols)
    (out / "fig3.svg").write_text(line_chart(
        series, f"mean log ||r_k|| over {cfg.trials} trials, m = m*", "iteration k",
        "log ||r_k||_2"))
    meta = _write_meta(out / "metadata.json", cfg, results, {
        "experiment": "exp3",
        "slopes": {k: fitted_slope(v.mean) for k, v in curves.items()},
        "clipped_values": {k: v.clipped for k, v in curves.items()},
        "bound_aggregation": "bound_log_r = pointwise mean of per-trial lines",
    })
    return ExperimentResult("exp3", curves, meta,
                            [str(out / f) for f in ("curves.csv", "fig3.svg", "metadata.json")])


# -- recovery audit -----------------------------------------------------------


def audit_trial(task: dict) -> dict:
    d, n = task["d"], task["n"]
    D = gen_dictionary(SynthConfig(d, n, 0, task["dict_seed"], task["signal_seed"]))
    metrics = analyze(D)
    m = _sparsity(task["m_mult"], metrics.m_star)
    if m < 1 or m > n:
        return {"trial": task["trial"], "m": m, "m_star": metrics.m_star, "skipped": True,
                "coherence": metrics.coherence, "dict_seed": task["dict_seed"],
                "signal_seed": task["signal_seed"]}
    inst = gen_instance(D, SynthConfig(d, n, m, task["dict_seed"], task["signal_seed"]))
    beta = task["beta_mult"] * inst.l1_coeff_norm
    traces = {
        "FW": fw_solve(D, inst.signal, FwConfig(beta, max_iters=task["max_iters"])),
        "MP": mp_solve(D, inst.signal, PursuitConfig(max_iters=task["max_iters"])),
        "OMP": omp_solve(D, inst.signal, PursuitConfig(max_iters=max(task["max_iters"], m))),
    }
    off = {k: int(np.count_nonzero(~np.isin(t.atoms(), inst.support))) for k, t in traces.items()}
    omp = traces["OMP"]
    return {"trial": task["trial"], "m": m, "m_star": metrics.m_star, "skipped": False,
            "coherence": metrics.coherence, "dict_seed": task["dict_seed"],
            "signal_seed": task["signal_seed"], "off_support": off,
            "omp_iterations": omp.n_iter,
            "omp_exact": bool(omp.n_iter == m and omp.final_residual_norm <= 1e-10 * inst.l2_signal_norm)}


def run_recovery_audit(cfg: ExperimentConfig) -> dict:
    """FW, MP and OMP on the same instances; count off-support selections.

    ``guaranteed`` is true when every trial's sparsity is within ``m*``; only
    then are nonzero counts invariant violations.
    """
    tasks = [{**t, "m_mult": cfg.m_mult[0], "beta_mult": cfg.beta_mult[0] if cfg.beta_mult else 8.0}
             for t in _tasks(cfg)]
    results = _map(audit_trial, tasks, cfg.jobs)
    done = [r for r in results if not r["skipped"]]
    totals = {k: sum(r["off_support"][k] for r in done) for k in ("FW", "MP", "OMP")}
    hist: dict[int, int] = {}
    for r in done:
        delta = r["omp_iterations"] - r["m"]
        hist[delta] = hist.get(delta, 0) + 1
    guaranteed = all(r["m"] <= r["m_star"] for r in done)
    summary = {
        "experiment": "audit",
        "library_version": __version__,
        "config": {**asdict(cfg), "m_mult": list(cfg.m_mult), "beta_mult": list(cfg.beta_mult)},
        "trials": len(results),
        "skipped": len(results) - len(done),
        "guaranteed": guaranteed,
        "off_support_selections": totals,
        "omp_iterations_minus_m": {str(k): v for k, v in sorted(hist.items())},
        "omp_exact_trials": sum(r["omp_exact"] for r in done),
        "dictionaries": [{"trial": r["trial"], "coherence": r["coherence"], "m_star": r["m_star"],
                          "dict_seed": r["dict_seed"], "signal_seed": r["signal_seed"]} for r in results],
    }
    summary["violation"] = guaranteed and (
        any(totals.values()) or summary["omp_exact_trials"] != len(done))
    out = _prepare(cfg)
    (out / "audit.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
