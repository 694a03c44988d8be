"""Frank-Wolfe on the l1 ball, Matching Pursuit and Orthogonal Matching Pursuit.

All three solvers share :func:`select_atom` (largest absolute correlation
with the residual, ties to the lowest index) and emit a :class:`SolverTrace`
with one :class:`IterationRecord` per executed iteration.

Frank-Wolfe minimizes ``0.5 * ||y - Phi x||^2`` subject to ``||x||_1 <= beta``
starting from ``x = 0``.  The linear minimization oracle over the l1 ball
returns the vertex ``sign * beta * e_i`` of the selected atom, and the step
along ``s - x`` is found by exact line search.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dictionary import Dictionary, as_support
from .exceptions import (
    DegenerateDirection,
    DimensionMismatch,
    RankDeficientSelection,
    UndefinedRatio,
    ZeroResidual,
)

DEFAULT_RELATIVE_TOL = 1e-10
RECOMPUTE_EVERY = 100
ZERO_RESIDUAL = 1e-14
ZERO_DIRECTION = 1e-14

TRACE_FORMAT_VERSION = 1
CSV_COLUMNS = ("k", "atom", "sign", "gamma", "residual_norm", "iterate_l1", "rho")


@dataclass(frozen=True)
class FwConfig:
    """Frank-Wolfe settings.

    ``residual_tol=None`` means ``1e-10 * ||y||_2``.  ``record_iterates``
    stores a sparse snapshot of every iterate in the trace, which the
    theory checks need.
    """

    beta: float
    max_iters: int = 1000
    residual_tol: float | None = None
    record_rho: bool = False
    record_iterates: bool = True

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.residual_tol is not None and self.residual_tol < 0:
            raise ValueError("residual_tol must be nonnegative")


@dataclass(frozen=True)
class PursuitConfig:
    """Settings for MP and OMP (same meaning as in :class:`FwConfig`)."""

    max_iters: int = 1000
    residual_tol: float | None = None
    record_rho: bool = False
    record_iterates: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.residual_tol is not None and self.residual_tol < 0:
            raise ValueError("residual_tol must be nonnegative")


@dataclass(frozen=True, slots=True)
class IterationRecord:
    """State at the start of iteration ``k`` and the move taken from it.

    ``residual_norm`` and ``iterate_l1`` describe ``x_k`` (before the
    update).  MP and OMP always take a full step and record ``gamma = 1``.
    """

    k: int
    atom: int
    sign: int
    gamma: float
    residual_norm: float
    iterate_l1: float
    rho: float | None = None


@dataclass(eq=False)
class SolverTrace:
    algorithm: str
    records: list[IterationRecord]
    final_x: np.ndarray
    final_residual_norm: float
    converged: bool
    stop_reason: str
    signal_norm: float
    iterates: list[tuple[np.ndarray, np.ndarray]] | None = field(default=None, repr=False)
    config: dict = field(default_factory=dict)

    @property
    def n_iter(self) -> int:
        return len(self.records)

    def residual_norms(self) -> np.ndarray:
        """``||r_0||, ..., ||r_N||`` where ``N`` is the number of iterations."""
        return np.array([r.residual_norm for r in self.records] + [self.final_residual_norm])

    def atoms(self) -> np.ndarray:
        return np.array([r.atom for r in self.records], dtype=np.int64)

    def iterate(self, k: int) -> np.ndarray:
        """Dense iterate ``x_k``; ``k == n_iter`` gives ``final_x``."""
        if k == self.n_iter:
            return self.final_x.copy()
        if self.iterates is None:
            raise ValueError("trace was recorded without iterates")
        idx, vals = self.iterates[k]
        x = np.zeros(self.final_x.size)
        x[idx] = vals
        return x

    # -- export ---------------------------------------------------------------

    def to_jsonl(self, header: dict | None = None) -> str:
        """One header line (config, seeds, summary) then one record per line."""
        head = {
            "format": "fwsparse-trace",
            "version": TRACE_FORMAT_VERSION,
            "algorithm": self.algorithm,
            "config": self.config,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "signal_norm": self.signal_norm,
            "final_residual_norm": self.final_residual_norm,
            "final_x": _sparse_pairs(self.final_x),
            "n": int(self.final_x.size),
        }
        if header:
            head.update(header)
        lines = [json.dumps(head)]
        lines.extend(json.dumps(asdict(r)) for r in self.records)
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# fwsparse trace v{TRACE_FORMAT_VERSION} algorithm={self.algorithm}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow(
                [r.k, r.atom, r.sign, repr(r.gamma), repr(r.residual_norm), repr(r.iterate_l1),
                 "" if r.rho is None else repr(r.rho)]
            )
        return buf.getvalue()


def _sparse_pairs(x: np.ndarray) -> list:
    return [[int(i), float(x[i])] for i in np.flatnonzero(x)]


def trace_from_jsonl(text: str) -> SolverTrace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = json.loads(lines[0])
    x = np.zeros(head["n"])
    for i, v in head["final_x"]:
        x[i] = v
    records = [IterationRecord(**json.loads(ln)) for ln in lines[1:]]
    return SolverTrace(
        algorithm=head["algorithm"],
        records=records,
        final_x=x,
        final_residual_norm=head["final_residual_norm"],
        converged=head["converged"],
        stop_reason=head["stop_reason"],
        signal_norm=head["signal_norm"],
        config=head.get("config", {}),
    )


# -- shared pieces ------------------------------------------------------------


def _matrix(dictionary) -> np.ndarray:
    return dictionary.data if isinstance(dictionary, Dictionary) else np.asarray(dictionary)


def _check_signal(phi: np.ndarray, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != phi.shape[0]:
        raise DimensionMismatch(f"signal has length {y.size}, dictionary has d={phi.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise ValueError("signal contains non-finite entries")
    return y


def _argmax_abs(corr: np.ndarray) -> tuple[int, int]:
    # np.argmax returns the first maximizer: ties go to the lowest index.
    i = int(np.argmax(np.abs(corr)))
    return i, (1 if corr[i] >= 0 else -1)


def select_atom(dictionary, residual) -> tuple[int, int]:
    """Index maximizing ``|<phi_i, r>|`` and the sign of that inner product."""
    phi = _matrix(dictionary)
    r = np.asarray(residual, dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual contains non-finite entries")
    if np.linalg.norm(r) < ZERO_RESIDUAL:
        raise ZeroResidual("residual is zero; the solver should have stopped")
    return _argmax_abs(phi.T @ r)


def rho(dictionary, support: Sequence[int], residual) -> float:
    """Good-atom ratio: off-support over on-support max absolute correlation.

    A value below one means the next selection is an atom of ``support``.
    """
    phi = _matrix(dictionary)
    s = as_support(support, phi.shape[1])
    return _rho_from_corr(phi.T @ np.asarray(residual, dtype=np.float64), s)


def _rho_from_corr(corr: np.ndarray, support: np.ndarray) -> float:
    a = np.abs(corr)
    den = a[support].max() if support.size else 0.0
    if den <= ZERO_RESIDUAL:
        raise UndefinedRatio("residual is orthogonal to every support atom")
    mask = np.ones(a.size, dtype=bool)
    mask[support] = False
    num = a[mask].max() if mask.any() else 0.0
    return float(num / den)


def fw_step_size(dictionary, x_k, s_k, r_k) -> float:
    """Exact line-search step for a Frank-Wolfe move from ``x_k`` towards ``s_k``.

    ``s_k`` is either a dense vector or an ``(index, value)`` pair describing
    the vertex ``value * e_index``.  Returns
    ``clip(<Phi(s-x), r> / ||Phi(s-x)||^2, 0, 1)``.
    """
    phi = _matrix(dictionary)
    x = np.asarray(x_k, dtype=np.float64)
    if isinstance(s_k, tuple):
        i, v = s_k
        s = np.zeros_like(x)
        s[int(i)] = v
    else:
        s = np.asarray(s_k, dtype=np.float64)
    direction = phi @ (s - x)
    return _exact_step(direction, np.asarray(r_k, dtype=np.float64), strict=True)


def _exact_step(direction: np.ndarray, r: np.ndarray, strict: bool = False) -> float:
    den = direction @ direction
    if den < ZERO_DIRECTION**2:
        if strict:
            raise DegenerateDirection("Phi (s_k - x_k) vanishes")
        return 0.0
    return float(min(max((direction @ r) / den, 0.0), 1.0))


def _vertex_step(atom: np.ndarray, phi_x: np.ndarray, r: np.ndarray,
                 vertex: float) -> tuple[float, float]:
    """Exact line search towards ``vertex * e_i``, returned as ``(gamma, gamma * vertex)``.

    Solved for the coefficient move ``t = gamma * vertex`` along
    ``u = phi_i - Phi x / vertex`` (so ``Phi(s - x) = vertex * u``).  From
    ``x = 0`` this gives ``t = <phi_i, r> / ||phi_i||^2`` with no detour
    through ``beta**2``, so exactly representable answers come out exact.
    """
    u = atom - phi_x / vertex
    den = u @ u
    if abs(vertex) * np.sqrt(den) < ZERO_DIRECTION:
        return 0.0, 0.0
    t = (u @ r) / den
    gamma = t / vertex
    if gamma <= 0.0:
        return 0.0, 0.0
    if gamma >= 1.0:
        return 1.0, vertex
    return float(gamma), float(t)


def _resolve_tol(tol: float | None, y_norm: float) -> float:
    return DEFAULT_RELATIVE_TOL * y_norm if tol is None else float(tol)


def _snapshot(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.flatnonzero(x)
    return idx, x[idx].copy()


# -- solvers ------------------------------------------------------------------


def fw_solve(dictionary, y, cfg: FwConfig, support: Sequence[int] | None = None) -> SolverTrace:
    """Run Frank-Wolfe for ``min 0.5||y - Phi x||^2  s.t. ||x||_1 <= beta``.

    Stops when ``||r_k|| <= residual_tol``, after ``max_iters`` iterations,
    or when the line search returns ``gamma = 0`` (the iterate is optimal on
    the ball; reported as converged).  ``support`` is only needed for
    ``cfg.record_rho``.

    ``Phi x_k`` is updated in O(d) per iteration and recomputed from the
    nonzero coefficients every 100 iterations to bound drift.
    """
    phi = _matrix(dictionary)
    y = _check_signal(phi, y)
    d, n = phi.shape
    beta = float(cfg.beta)
    sup = as_support(support, n) if support is not None else None
    if cfg.record_rho and sup is None:
        raise ValueError("record_rho needs the true support")

    x = np.zeros(n)
    nonzero = np.zeros(n, dtype=bool)
    phi_x = np.zeros(d)
    r = y.copy()
    y_norm = float(np.linalg.norm(y))
    rn = y_norm
    tol = _resolve_tol(cfg.residual_tol, y_norm)
    l1 = 0.0

    records: list[IterationRecord] = []
    iterates = [] if cfg.record_iterates else None
    reason = "max_iters"
    for k in range(cfg.max_iters):
        if rn <= tol or rn < ZERO_RESIDUAL:
            reason = "residual_tol"
            break
        corr = phi.T @ r
        i, sign = _argmax_abs(corr)
        rho_k = _rho_from_corr(corr, sup) if cfg.record_rho else None

        vertex = sign * beta
        gamma, step = _vertex_step(phi[:, i], phi_x, r, vertex)

        records.append(IterationRecord(k, i, sign, gamma, rn, l1, rho_k))
        if iterates is not None:
            iterates.append(_snapshot(x))
        if gamma == 0.0:
            reason = "stationary"
            break

        x *= 1.0 - gamma
        x[i] += step
        if gamma == 1.0:
            nonzero[:] = False
        nonzero[i] = True
        if (k + 1) % RECOMPUTE_EVERY == 0:
            idx = np.flatnonzero(nonzero)
            phi_x = phi[:, idx] @ x[idx]
        else:
            phi_x = (1.0 - gamma) * phi_x + step * phi[:, i]
        r = y - phi_x
        rn = float(np.linalg.norm(r))
        l1 = float(np.abs(x).sum())
    else:
        reason = "residual_tol" if rn <= tol else "max_iters"

    idx = np.flatnonzero(nonzero)
    final_rn = float(np.linalg.norm(y - phi[:, idx] @ x[idx]))
    return SolverTrace(
        algorithm="FW",
        records=records,
        final_x=x,
        final_residual_norm=final_rn,
        converged=reason in ("residual_tol", "stationary"),
        stop_reason=reason,
        signal_norm=y_norm,
        iterates=iterates,
        config={"beta": beta, "max_iters": cfg.max_iters, "residual_tol": tol},
    )


def mp_solve(dictionary, y, cfg: PursuitConfig | None = None,
             support: Sequence[int] | None = None) -> SolverTrace:
    """Matching Pursuit: add ``<phi_i, r>`` to coefficient ``i`` of the selected atom."""
    cfg = cfg or PursuitConfig()
    phi = _matrix(dictionary)
    y = _check_signal(phi, y)
    d, n = phi.shape
    sup = as_support(support, n) if support is not None else None
    if cfg.record_rho and sup is None:
        raise ValueError("record_rho needs the true support")

    x = np.zeros(n)
    r = y.copy()
    y_norm = float(np.linalg.norm(y))
    rn = y_norm
    tol = _resolve_tol(cfg.residual_tol, y_norm)
    records: list[IterationRecord] = []
    iterates = [] if cfg.record_iterates else None
    reason = "max_iters"
    for k in range(cfg.max_iters):
        if rn <= tol or rn < ZERO_RESIDUAL:
            reason = "residual_tol"
            break
        corr = phi.T @ r
        i, sign = _argmax_abs(corr)
        rho_k = _rho_from_corr(corr, sup) if cfg.record_rho else None
        records.append(IterationRecord(k, i, sign, 1.0, rn, float(np.abs(x).sum()), rho_k))
        if iterates is not None:
            iterates.append(_snapshot(x))
        x[i] += corr[i]
        if (k + 1) % RECOMPUTE_EVERY == 0:
            idx = np.flatnonzero(x)
            r = y - phi[:, idx] @ x[idx]
        else:
            r = r - corr[i] * phi[:, i]
        rn = float(np.linalg.norm(r))
    else:
        reason = "residual_tol" if rn <= tol else "max_iters"

    idx = np.flatnonzero(x)
    final_rn = float(np.linalg.norm(y - phi[:, idx] @ x[idx]))
    return SolverTrace("MP", records, x, final_rn, reason == "residual_tol", reason, y_norm,
                       iterates, {"max_iters": cfg.max_iters, "residual_tol": tol})


def omp_solve(dictionary, y, cfg: PursuitConfig | None = None,
              support: Sequence[int] | None = None) -> SolverTrace:
    """Orthogonal Matching Pursuit with a least-squares refit on the selected atoms.

    The refit is recomputed from the selected columns at every iteration
    (SVD-based least squares), which leaves the residual orthogonal to every
    selected atom.
    """
    cfg = cfg or PursuitConfig()
    phi = _matrix(dictionary)
    y = _check_signal(phi, y)
    d, n = phi.shape
    sup = as_support(support, n) if support is not None else None
    if cfg.record_rho and sup is None:
        raise ValueError("record_rho needs the true support")

    x = np.zeros(n)
    r = y.copy()
    y_norm = float(np.linalg.norm(y))
    rn = y_norm
    tol = _resolve_tol(cfg.residual_tol, y_norm)
    selected: list[int] = []
    records: list[IterationRecord] = []
    iterates = [] if cfg.record_iterates else None
    reason = "max_iters"
    for k in range(cfg.max_iters):
        if rn <= tol or rn < ZERO_RESIDUAL:
            reason = "residual_tol"
            break
        corr = phi.T @ r
        i, sign = _argmax_abs(corr)
        if i in selected:
            raise RankDeficientSelection(f"atom {i} selected twice at iteration {k}")
        rho_k = _rho_from_corr(corr, sup) if cfg.record_rho else None
        records.append(IterationRecord(k, i, sign, 1.0, rn, float(np.abs(x).sum()), rho_k))
        if iterates is not None:
            iterates.append(_snapshot(x))
        selected.append(i)
        sub = phi[:, selected]
        coef, _, _, sv = np.linalg.lstsq(sub, y, rcond=None)
        if sv.min() <= 1e-10:
            raise RankDeficientSelection(
                f"selected atoms are dependent (sigma_min={sv.min():.3g}) at iteration {k}"
            )
        x[:] = 0.0
        x[selected] = coef
        r = y - sub @ coef
        rn = float(np.linalg.norm(r))
    else:
        reason = "residual_tol" if rn <= tol else "max_iters"

    return SolverTrace("OMP", records, x, rn, reason == "residual_tol", reason, y_norm,
                       iterates, {"max_iters": cfg.max_iters, "residual_tol": tol})


SOLVERS = {"FW": fw_solve, "MP": mp_solve, "OMP": omp_solve}
