"""Dictionaries of unit-norm atoms and their conditioning metrics.

The quantities computed here (coherence, Babel function, exact recovery
statistic, singular-value lower bound) are the inputs of every recovery and
rate bound in :mod:`fwsparse.theory`.  All of them are derived from one cached
Gram matrix so that, e.g., ``babel(D, 1)[1] == coherence(D)`` holds bit for bit.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg

from .exceptions import (
    BoundVacuous,
    NonFinite,
    NotUnitNorm,
    RangeError,
    RankDeficientSupport,
    SingleAtom,
    ZeroColumn,
)

UNIT_NORM_TOL = 1e-8
ZERO_COLUMN_TOL = 1e-12
RANK_TOL = 1e-10

FILE_MAGIC = b"FWSPDICT"
_HEADER = struct.Struct("<8sII")


@dataclass(frozen=True, eq=False)
class Dictionary:
    """A ``d x n`` matrix whose columns (atoms) have unit Euclidean norm.

    Build instances with :func:`new_dictionary`, which validates the input.
    The Gram matrix is computed on first use and cached for the lifetime of
    the object.
    """

    data: np.ndarray

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @cached_property
    def gram(self) -> np.ndarray:
        g = self.data.T @ self.data
        # BLAS does not guarantee a bitwise symmetric product.
        g = np.triu(g) + np.triu(g, 1).T
        g.flags.writeable = False
        return g

    def atom(self, i: int) -> np.ndarray:
        return self.data[:, i]

    def __repr__(self) -> str:
        return f"Dictionary(d={self.d}, n={self.n})"


def new_dictionary(data, normalize: bool = False) -> Dictionary:
    """Validate ``data`` and wrap it as a :class:`Dictionary`.

    Columns whose norm differs from one by more than ``1e-8`` are rejected
    unless ``normalize=True``, in which case every column is divided by its
    norm first.
    """
    a = np.array(data, dtype=np.float64, copy=True, order="F")
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.size == 0:
        raise RangeError(f"expected a nonempty 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("dictionary contains non-finite entries")
    norms = np.linalg.norm(a, axis=0)
    if normalize:
        bad = np.flatnonzero(norms < ZERO_COLUMN_TOL)
        if bad.size:
            raise ZeroColumn(f"column {bad[0]} has norm {norms[bad[0]]:.3g}")
        a /= norms
    else:
        dev = np.abs(norms - 1.0)
        bad = np.flatnonzero(dev > UNIT_NORM_TOL)
        if bad.size:
            raise NotUnitNorm(
                f"column {bad[0]} has norm {norms[bad[0]]!r}; pass normalize=True to rescale"
            )
    a.flags.writeable = False
    return Dictionary(a)


def as_support(indices: Sequence[int], n: int) -> np.ndarray:
    """Return ``indices`` as a strictly increasing int array, validated against ``n``."""
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise RangeError(f"support indices must lie in [0, {n})")
    s = np.unique(idx)
    if s.size != idx.size:
        raise RangeError("support contains duplicate indices")
    return s


# -- coherence and Babel function -------------------------------------------


def coherence(dictionary: Dictionary) -> float:
    """Largest absolute inner product between two distinct atoms."""
    if dictionary.n < 2:
        raise SingleAtom("coherence needs at least two atoms")
    a = np.abs(dictionary.gram)
    off = a[~np.eye(dictionary.n, dtype=bool)]
    return float(off.max())


def babel(dictionary: Dictionary, m_max: int) -> np.ndarray:
    """Babel function values ``[mu1(0), ..., mu1(m_max)]``.

    ``mu1(m)`` maximizes, over supports of size ``m`` and atoms ``i`` outside
    them, the cumulative correlation ``sum_j |<phi_i, phi_j>|``.  For a fixed
    ``i`` the maximizing support is simply the ``m`` atoms with the largest
    ``|<phi_i, phi_j>|``, j != i (any other choice swaps a term for one no
    larger), and ``i`` is automatically outside it.  So ``mu1(m)`` is the max
    over rows of the sum of the ``m`` largest off-diagonal ``|Gram|`` entries.

    Sums are correctly rounded (``math.fsum``), which makes the result
    independent of summation order.  A float64 cumulative sum screens the
    rows; only rows within roundoff of the running maximum are summed exactly.
    """
    n = dictionary.n
    if not 0 <= m_max <= n - 1:
        raise RangeError(f"m_max must lie in [0, {n - 1}], got {m_max}")
    out = np.zeros(m_max + 1)
    if m_max == 0:
        return out
    a = np.abs(dictionary.gram).copy()
    np.fill_diagonal(a, -1.0)
    if m_max < n - 1:
        top = -np.partition(-a, m_max - 1, axis=1)[:, :m_max]
    else:
        top = a
    top = -np.sort(-top, axis=1)[:, :m_max]
    approx = np.cumsum(top, axis=1)
    for m in range(1, m_max + 1):
        col = approx[:, m - 1]
        best = col.max()
        rows = np.flatnonzero(col >= best - 1e-12 * max(best, 1.0))
        out[m] = max(math.fsum(top[i, :m]) for i in rows)
    return out


def m_star(metrics: "DictionaryMetrics") -> int:
    """Largest sparsity ``m`` with ``m < (1/mu + 1) / 2``.

    Found by a downward integer search so that no ceiling convention is
    involved.  An orthonormal dictionary (``mu == 0``) satisfies the
    condition for every ``m``; ``n`` is returned in that case.
    """
    return _m_star_from_coherence(metrics.coherence, metrics.n)


def _m_star_from_coherence(mu: float, n: int) -> int:
    # a support cannot have more than n atoms
    if mu <= 0.0 or 0.5 * (1.0 / mu + 1.0) > n:
        return n
    limit = 0.5 * (1.0 / mu + 1.0)
    m = math.ceil(limit)
    while m >= limit:
        m -= 1
    return max(m, 0)


def recovery_condition(m: int, mu: float) -> bool:
    """``m < (1/mu + 1) / 2``, the sparsity condition of the recovery guarantees."""
    if mu <= 0.0:
        return True
    return m < 0.5 * (1.0 / mu + 1.0)


# -- support-specific quantities ---------------------------------------------


def _check_rank(dictionary: Dictionary, support: np.ndarray) -> None:
    if support.size == 0:
        return
    sv = linalg.svdvals(dictionary.data[:, support])
    if sv.min() <= RANK_TOL:
        raise RankDeficientSupport(
            f"atoms of the support are (numerically) dependent: sigma_min={sv.min():.3g}"
        )


def erc(dictionary: Dictionary, support: Sequence[int]) -> float:
    """Exact recovery statistic ``max_{i not in S} ||pinv(Phi_S) phi_i||_1``.

    Recovery of any signal supported on ``S`` is guaranteed when the value is
    below one.  The pseudoinverse is applied through a Cholesky solve of the
    support's Gram block.
    """
    s = as_support(support, dictionary.n)
    _check_rank(dictionary, s)
    outside = np.setdiff1d(np.arange(dictionary.n), s)
    if s.size == 0 or outside.size == 0:
        return 0.0
    g = dictionary.gram
    factor = linalg.cho_factor(g[np.ix_(s, s)])
    coef = linalg.cho_solve(factor, g[np.ix_(s, outside)])
    return float(np.abs(coef).sum(axis=0).max())


def smallest_singular_value(dictionary: Dictionary, support: Sequence[int]) -> float:
    s = as_support(support, dictionary.n)
    return float(linalg.svdvals(dictionary.data[:, s]).min())


# -- aggregated metrics -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DictionaryMetrics:
    """Conditioning summary of a dictionary.

    ``babel[m]`` holds ``mu1(m)`` for ``m = 0 .. len(babel) - 1``.
    """

    coherence: float
    babel: np.ndarray
    m_star: int
    n: int
    d: int
    gram: np.ndarray = field(repr=False)

    def mu1(self, m: int) -> float:
        if not 0 <= m < len(self.babel):
            raise RangeError(f"Babel function only computed up to m={len(self.babel) - 1}")
        return float(self.babel[m])

    def lambda_min_lb(self, m: int) -> float:
        return lambda_min_lower_bound(self, m)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "coherence": self.coherence,
            "m_star": self.m_star,
            "babel": [float(v) for v in self.babel],
        }


def analyze(dictionary: Dictionary, m_max: int | None = None) -> DictionaryMetrics:
    """Compute coherence, Babel function and ``m*`` from the cached Gram.

    By default the Babel function is tabulated up to ``m* + 1`` (capped at
    ``n - 1``), enough for every bound evaluated at sparsities ``m <= m*``.
    """
    mu = coherence(dictionary)
    ms = _m_star_from_coherence(mu, dictionary.n)
    if m_max is None:
        m_max = min(dictionary.n - 1, ms + 1)
    b = babel(dictionary, m_max)
    b.flags.writeable = False
    return DictionaryMetrics(
        coherence=mu, babel=b, m_star=ms, n=dictionary.n, d=dictionary.d, gram=dictionary.gram
    )


def lambda_min_lower_bound(metrics: DictionaryMetrics, m: int) -> float:
    """``sqrt(1 - mu1(m-1))``, a lower bound on the smallest singular value of
    any ``m`` atoms."""
    if m < 1:
        raise RangeError("m must be at least 1")
    mu1 = metrics.mu1(m - 1)
    if mu1 >= 1.0:
        raise BoundVacuous(f"mu1({m - 1}) = {mu1} >= 1, the bound is vacuous")
    return math.sqrt(1.0 - mu1)


# -- file formats -------------------------------------------------------------


def save_dictionary(path, dictionary: Dictionary) -> None:
    """Write the binary format: 16-byte header then column-major little-endian f64."""
    d, n = dictionary.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FILE_MAGIC, d, n))
        fh.write(np.asarray(dictionary.data, dtype="<f8").tobytes(order="F"))


def load_dictionary(path, normalize: bool = False) -> Dictionary:
    """Load a dictionary from the binary format, or from CSV (one atom per column)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) == _HEADER.size and head[:8] == FILE_MAGIC:
            _, d, n = _HEADER.unpack(head)
            body = fh.read()
            if len(body) != 8 * d * n:
                raise RangeError(f"{path}: expected {8 * d * n} data bytes, found {len(body)}")
            data = np.frombuffer(body, dtype="<f8").reshape((d, n), order="F")
            return new_dictionary(data, normalize=normalize)
    return load_csv(path, normalize=normalize)


def load_csv(path, normalize: bool = False) -> Dictionary:
    data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    return new_dictionary(data, normalize=normalize)


def save_csv(path, dictionary: Dictionary) -> None:
    np.savetxt(path, dictionary.data, delimiter=",", fmt="%.17g")
