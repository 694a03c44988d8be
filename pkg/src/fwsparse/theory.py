"""Recovery and rate bounds for Frank-Wolfe, and checks of traces against them.

Notation: ``m`` is the sparsity of the signal, ``mu1`` the Babel function of
the dictionary, ``x*`` the true coefficients and ``beta`` the l1 radius.

* contraction factor beyond some iteration K:
  ``theta = (1/16) * (1 - mu1(m-1)) / m * (1 - ||x*||_1 / beta)**2``
* radius guaranteeing contraction from the first iteration:
  ``beta > 2 ||y||_2 sqrt(m / (1 - mu1(m-1)))``
* with ``tau = 2 ||y||_2 / beta * sqrt(m / (1 - mu1(m-1)))`` the contraction
  from the first iteration is ``(1 - mu1(m-1)) / (4m) * (1 - tau)**2``
* every iterate satisfies ``||x_k||_1 <= 2 ||y||_2 sqrt(m / (1 - mu1(m-1)))``
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dictionary import DictionaryMetrics, recovery_condition
from .exceptions import ConditionViolated, MismatchedTrace
from .pursuit import SolverTrace
from .synth import SparseInstance

RATIO_SLACK = 1e-12
RESIDUAL_FLOOR = 1e-13


def _check_mu1(mu1: float) -> None:
    if not 0.0 <= mu1 < 1.0:
        raise ConditionViolated(f"mu1(m-1) must lie in [0, 1), got {mu1}")


def theta(mu1_m_minus_1: float, m: int, x_star_l1: float, beta: float) -> float:
    """Per-iteration contraction of ``||r_k||^2`` guaranteed beyond some K."""
    _check_mu1(mu1_m_minus_1)
    if m < 1:
        raise ConditionViolated("m must be at least 1")
    if x_star_l1 < 0 or x_star_l1 > beta:
        raise ConditionViolated(f"need 0 <= ||x*||_1 <= beta, got {x_star_l1} and {beta}")
    return (1.0 - mu1_m_minus_1) / m * (1.0 - x_star_l1 / beta) ** 2 / 16.0


def _radius(y_l2: float, m: int, mu1: float) -> float:
    _check_mu1(mu1)
    if m < 1:
        raise ConditionViolated("m must be at least 1")
    return 2.0 * y_l2 * math.sqrt(m / (1.0 - mu1))


def beta_threshold(y_l2: float, m: int, mu1_m_minus_1: float) -> float:
    """Smallest l1 radius (exclusive) giving contraction from iteration 0."""
    return _radius(y_l2, m, mu1_m_minus_1)


def iterate_l1_bound(y_l2: float, m: int, mu1_m_minus_1: float) -> float:
    """Uniform bound on ``||x_k||_1`` along the Frank-Wolfe path.

    Same expression as :func:`beta_threshold`; kept separate because it is a
    different statement.
    """
    return _radius(y_l2, m, mu1_m_minus_1)


def tau(y_l2: float, m: int, mu1_m_minus_1: float, beta: float) -> float:
    return _radius(y_l2, m, mu1_m_minus_1) / beta


def first_iter_rate(mu1_m_minus_1: float, m: int, tau: float) -> float:
    _check_mu1(mu1_m_minus_1)
    if not 0.0 <= tau <= 1.0:
        raise ConditionViolated(f"tau must lie in [0, 1], got {tau} (beta below threshold)")
    return (1.0 - mu1_m_minus_1) / (4.0 * m) * (1.0 - tau) ** 2


def epsilon(x_star_l1: float, beta: float) -> float:
    return (beta - x_star_l1) / 2.0


def log_bound_line(y_l2: float, theta_value: float, ks) -> np.ndarray:
    """``log ||y|| + k/2 * log(1 - theta)`` evaluated at ``ks``."""
    ks = np.asarray(ks, dtype=np.float64)
    return math.log(y_l2) + 0.5 * ks * math.log1p(-theta_value)


# -- trace validation ---------------------------------------------------------


def contraction_ratios(trace: SolverTrace, floor: float = RESIDUAL_FLOOR):
    """Squared residual ratios ``||r_{k+1}||^2 / ||r_k||^2`` and a validity mask.

    Ratios whose starting residual is below ``floor * ||y||`` are masked out:
    both ends sit at the numerical floor.
    """
    rn = trace.residual_norms()
    if rn.size < 2:
        return np.zeros(0), np.zeros(0, dtype=bool)
    start, end = rn[:-1], rn[1:]
    valid = start >= floor * trace.signal_norm
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(valid, (end / np.where(valid, start, 1.0)) ** 2, np.nan)
    return ratios, valid


def detect_k(ratios: np.ndarray, valid: np.ndarray, bound: float) -> int | None:
    """Smallest K such that every valid ratio from K on is ``<= bound + 1e-12``.

    Returns None when the last valid ratio already violates the bound, i.e.
    the trace shows no tail on which the bound holds.
    """
    bad = valid & ~(ratios <= bound + RATIO_SLACK)
    idx = np.flatnonzero(bad)
    if idx.size == 0:
        return 0
    last = int(idx[-1])
    if not valid[last + 1:].any():
        return None
    return last + 1


@dataclass
class TheoryReport:
    """All bounds for one (instance, dictionary, beta) triple plus trace verdicts."""

    m: int
    coherence: float
    mu1_m_minus_1: float | None
    beta: float
    x_star_l1: float
    y_l2: float
    recovery_ok: bool
    theta: float | None
    beta_threshold: float | None
    tau: float | None
    theta_first_iter: float | None
    iterate_l1_bound: float | None
    epsilon: float
    K_detected: int | None
    support_confined: bool
    off_support_selections: int
    first_iter_ok: bool | None
    iterate_bound_ok: bool | None
    max_iterate_l1: float
    k_epsilon: int | None
    n_iter: int

    def to_json(self, **inputs) -> str:
        rec = asdict(self)
        if inputs:
            rec["inputs"] = inputs
        return json.dumps(rec, indent=2)


def validate_trace(trace: SolverTrace, instance: SparseInstance,
                   metrics: DictionaryMetrics, beta: float) -> TheoryReport:
    """Check a Frank-Wolfe trace against every bound that applies to it.

    * support confinement: every selected atom lies in the true support;
    * rate beyond K: ``theta`` and the detected K (see :func:`detect_k`);
    * rate from the first iteration, when ``beta`` exceeds the threshold;
    * uniform iterate l1 bound;
    * ``epsilon = (beta - ||x*||_1)/2`` and the first iteration from which
      ``||x_k - x*||_1 <= epsilon`` holds for the rest of the trace.

    ``theta`` uses ``mu1(m-1)`` at the instance's own sparsity.  Quantities
    whose hypotheses fail are reported as None.
    """
    n = instance.coefficients.size
    if trace.final_x.size != n or metrics.n != n:
        raise MismatchedTrace("trace, instance and dictionary disagree on n")
    y_l2 = instance.l2_signal_norm
    if abs(trace.signal_norm - y_l2) > 1e-10 * max(y_l2, 1.0):
        raise MismatchedTrace("trace was not produced on this signal")
    if trace.records and abs(trace.records[0].residual_norm - y_l2) > 1e-10 * max(y_l2, 1.0):
        raise MismatchedTrace("first residual differs from ||y||")

    m = instance.m
    x_l1 = instance.l1_coeff_norm
    support = instance.support
    atoms = trace.atoms()
    off = int(np.count_nonzero(~np.isin(atoms, support)))
    rec_ok = recovery_condition(m, metrics.coherence) if m >= 1 else True

    mu1 = None
    if 1 <= m <= len(metrics.babel):
        mu1 = metrics.mu1(m - 1)
    usable = mu1 is not None and mu1 < 1.0

    th = theta(mu1, m, x_l1, beta) if usable and x_l1 <= beta else None
    thr = beta_threshold(y_l2, m, mu1) if usable else None
    t = tau(y_l2, m, mu1, beta) if usable else None
    th1 = first_iter_rate(mu1, m, t) if usable and t <= 1.0 else None
    l1b = iterate_l1_bound(y_l2, m, mu1) if usable else None

    ratios, valid = contraction_ratios(trace)
    k_det = None
    if th is not None and th > 0:
        k_det = detect_k(ratios, valid, 1.0 - th)
    first_ok = None
    if th1 is not None and t < 1.0:
        first_ok = bool(np.all(ratios[valid] <= 1.0 - th1 + RATIO_SLACK))

    l1s = [r.iterate_l1 for r in trace.records] + [float(np.abs(trace.final_x).sum())]
    max_l1 = max(l1s)
    bound_ok = bool(max_l1 <= l1b) if l1b is not None else None

    eps = epsilon(x_l1, beta)
    k_eps = None
    if trace.iterates is not None and eps > 0:
        dist = np.array([np.abs(trace.iterate(k) - instance.coefficients).sum()
                         for k in range(trace.n_iter + 1)])
        outside = np.flatnonzero(dist > eps)
        if outside.size == 0:
            k_eps = 0
        elif outside[-1] < dist.size - 1:
            k_eps = int(outside[-1]) + 1

    return TheoryReport(
        m=m,
        coherence=metrics.coherence,
        mu1_m_minus_1=mu1,
        beta=float(beta),
        x_star_l1=x_l1,
        y_l2=y_l2,
        recovery_ok=bool(rec_ok),
        theta=th,
        beta_threshold=thr,
        tau=t,
        theta_first_iter=th1,
        iterate_l1_bound=l1b,
        epsilon=eps,
        K_detected=k_det,
        support_confined=off == 0,
        off_support_selections=off,
        first_iter_ok=first_ok,
        iterate_bound_ok=bound_ok,
        max_iterate_l1=max_l1,
        k_epsilon=k_eps,
        n_iter=trace.n_iter,
    )
