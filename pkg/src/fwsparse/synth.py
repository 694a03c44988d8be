"""Seeded random dictionaries and exactly m-sparse test signals.

Randomness comes from a pinned generator so fixtures can be replayed
anywhere:

* bit source: Philox-4x64-10 with its 128-bit key set to ``(seed, 0)`` and
  the counter starting at zero (``numpy.random.Philox(key=seed)``), read as a
  stream of uint64 words;
* uniform doubles: ``u = ((w >> 11) + 0.5) * 2**-53``, so ``0 < u < 1``;
* standard normals: inverse CDF, ``z = ndtri(u)``, one word per draw;
* bounded integers in ``[0, b)``: rejection of words ``w >= 2**64 - (2**64 % b)``,
  then ``w % b``.

Dictionaries are filled column by column (column-major order) and every
column is then scaled to unit norm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import ndtri

from .dictionary import Dictionary, new_dictionary
from .exceptions import ConfigError, DimensionMismatch

_MASK64 = (1 << 64) - 1
COEFF_FLOOR = 1e-12


class SeededStream:
    """Pinned pseudo-random stream (see module docstring for the exact algorithm)."""

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed <= _MASK64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._bits = np.random.Philox(key=seed)

    def words(self, size: int) -> np.ndarray:
        return self._bits.random_raw(size)

    def uniform(self, size: int) -> np.ndarray:
        w = self.words(size)
        return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normal(self, size: int) -> np.ndarray:
        return ndtri(self.uniform(size))

    def integer(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` without modulo bias."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            w = int(self.words(1)[0])
            if w < limit:
                return w % bound


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seeds(base_seed: int, trial: int) -> tuple[int, int]:
    """Disjoint ``(dict_seed, signal_seed)`` for trial number ``trial``."""
    k = (int(base_seed) + 2 * int(trial)) & _MASK64
    return splitmix64(k), splitmix64((k + 1) & _MASK64)


@dataclass(frozen=True)
class SynthConfig:
    d: int
    n: int
    m: int
    dict_seed: int = 0
    signal_seed: int = 1
    coefficient_law: str = "standard_normal"

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise ConfigError("d and n must be positive")
        if not 0 <= self.m <= self.n:
            raise ConfigError(f"need 0 <= m <= n, got m={self.m}, n={self.n}")
        if self.coefficient_law != "standard_normal":
            raise ConfigError("only standard normal coefficients are supported")
        for s in (self.dict_seed, self.signal_seed):
            if not 0 <= int(s) <= _MASK64:
                raise ConfigError("seeds must be 64-bit unsigned integers")


@dataclass(frozen=True, eq=False)
class SparseInstance:
    coefficients: np.ndarray
    support: np.ndarray
    signal: np.ndarray
    l1_coeff_norm: float
    l2_signal_norm: float
    config: SynthConfig | None = None

    @property
    def m(self) -> int:
        return int(self.support.size)

    def to_json(self) -> str:
        cfg = self.config
        rec = {
            "d": int(self.signal.size),
            "n": int(self.coefficients.size),
            "m": self.m,
            "support": [int(i) for i in self.support],
            "coefficients": [[int(i), float(self.coefficients[i])] for i in self.support],
            "seeds": None
            if cfg is None
            else {"dict_seed": int(cfg.dict_seed), "signal_seed": int(cfg.signal_seed)},
        }
        return json.dumps(rec)


def gen_dictionary(cfg: SynthConfig) -> Dictionary:
    """Gaussian ``d x n`` dictionary with unit-norm columns."""
    z = SeededStream(cfg.dict_seed).normal(cfg.d * cfg.n)
    return new_dictionary(z.reshape((cfg.d, cfg.n), order="F"), normalize=True)


def make_instance(dictionary: Dictionary, coefficients, config: SynthConfig | None = None):
    """Wrap known coefficients as a :class:`SparseInstance` (signal = Phi x)."""
    x = np.asarray(coefficients, dtype=np.float64).ravel()
    if x.size != dictionary.n:
        raise DimensionMismatch(f"expected {dictionary.n} coefficients, got {x.size}")
    support = np.flatnonzero(x)
    y = dictionary.data[:, support] @ x[support] if support.size else np.zeros(dictionary.d)
    x.flags.writeable = False
    y.flags.writeable = False
    return SparseInstance(
        coefficients=x,
        support=support,
        signal=y,
        l1_coeff_norm=float(np.abs(x).sum()),
        l2_signal_norm=float(np.linalg.norm(y)),
        config=config,
    )


def gen_instance(dictionary: Dictionary, cfg: SynthConfig) -> SparseInstance:
    """Draw an exactly ``cfg.m``-sparse signal on ``dictionary``.

    The support is the prefix of a Fisher-Yates shuffle; coefficient ``k``
    belongs to the ``k``-th drawn index.  Coefficients below ``1e-12`` in
    magnitude are redrawn.
    """
    if cfg.n != dictionary.n or cfg.d != dictionary.d:
        raise DimensionMismatch("config dimensions do not match the dictionary")
    stream = SeededStream(cfg.signal_seed)
    perm = np.arange(cfg.n)
    for i in range(cfg.m):
        j = i + stream.integer(cfg.n - i)
        perm[i], perm[j] = perm[j], perm[i]
    x = np.zeros(cfg.n)
    for idx in perm[: cfg.m]:
        c = stream.normal(1)[0]
        while abs(c) < COEFF_FLOOR:
            c = stream.normal(1)[0]
        x[idx] = c
    return make_instance(dictionary, x, config=cfg)


def instance_from_json(dictionary: Dictionary, text: str) -> SparseInstance:
    rec = json.loads(text)
    x = np.zeros(rec["n"])
    for i, v in rec["coefficients"]:
        x[i] = v
    cfg = None
    if rec.get("seeds"):
        cfg = SynthConfig(rec["d"], rec["n"], rec["m"], **rec["seeds"])
    return make_instance(dictionary, x, config=cfg)


def iter_trials(d: int, n: int, m: int, trials: int, base_seed: int) -> Iterator[SynthConfig]:
    for t in range(trials):
        ds, ss = trial_seeds(base_seed, t)
        yield SynthConfig(d, n, m, dict_seed=ds, signal_seed=ss)
