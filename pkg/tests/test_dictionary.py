import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwsparse import dictionary as dct
from fwsparse.exceptions import (
    BoundVacuous,
    NonFinite,
    NotUnitNorm,
    RangeError,
    RankDeficientSupport,
    SingleAtom,
    ZeroColumn,
)
from fwsparse.synth import SynthConfig, gen_dictionary

from oracles import brute_coherence, exhaustive_babel, pairwise_coherence

# Oracle value from brute_coherence on gen_dictionary(d=1000, n=2000, dict_seed=42).
COHERENCE_1000x2000_SEED42 = 0.15589132218803398


def test_identity_is_valid():
    D = dct.new_dictionary(np.eye(3))
    assert D.shape == (3, 3)
    assert np.all(np.abs(np.linalg.norm(D.data, axis=0) - 1) <= 1e-10)


def test_rejects_non_unit_columns():
    with pytest.raises(NotUnitNorm):
        dct.new_dictionary(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_normalize_flag(two_atoms):
    np.testing.assert_array_equal(two_atoms.data[:, 0], [1.0, 0.0])
    np.testing.assert_allclose(two_atoms.data[:, 1], [1 / math.sqrt(2)] * 2, rtol=0, atol=1e-16)


def test_construction_errors():
    with pytest.raises(ZeroColumn):
        dct.new_dictionary(np.array([[1.0, 0.0], [0.0, 0.0]]), normalize=True)
    with pytest.raises(NonFinite):
        dct.new_dictionary(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(RangeError):
        dct.new_dictionary(np.zeros((0, 3)))


def test_dictionary_is_read_only(identity4):
    with pytest.raises(ValueError):
        identity4.data[0, 0] = 2.0


def test_coherence_small_cases(identity4, two_atoms):
    assert dct.coherence(identity4) == 0.0
    assert dct.coherence(two_atoms) == pytest.approx(0.7071067811865476, abs=1e-15)
    with pytest.raises(SingleAtom):
        dct.coherence(dct.new_dictionary(np.eye(3)[:, :1]))


def test_coherence_matches_pairwise_scan():
    D = gen_dictionary(SynthConfig(30, 60, 1, dict_seed=5))
    assert dct.coherence(D) == pytest.approx(pairwise_coherence(D.data), abs=1e-15)


def test_coherence_regression_large():
    D = gen_dictionary(SynthConfig(1000, 2000, 1, dict_seed=42))
    mu = dct.coherence(D)
    assert mu == pytest.approx(COHERENCE_1000x2000_SEED42, abs=1e-15)
    assert mu == pytest.approx(brute_coherence(D.data), abs=1e-15)


def test_babel_small_cases(identity4, two_atoms):
    np.testing.assert_array_equal(dct.babel(identity4, 3), [0, 0, 0, 0])
    b = dct.babel(two_atoms, 1)
    assert b[0] == 0.0 and b[1] == dct.coherence(two_atoms)


def test_babel_three_atoms_in_plane():
    ang = np.deg2rad([0.0, 45.0, 90.0])
    D = dct.new_dictionary(np.vstack([np.cos(ang), np.sin(ang)]), normalize=True)
    expected = exhaustive_babel(D.gram, 2)
    got = dct.babel(D, 2)
    assert list(got) == expected
    assert got[1] == pytest.approx(math.cos(math.pi / 4), abs=1e-15)
    # the 45 degree atom against {0 deg, 90 deg}: cos 45 + cos 45
    assert got[2] == pytest.approx(math.sqrt(2), abs=1e-15)


def test_babel_range_error(identity4):
    with pytest.raises(RangeError):
        dct.babel(identity4, 4)
    with pytest.raises(RangeError):
        dct.babel(identity4, -1)


@pytest.mark.parametrize("seed", range(5))
def test_babel_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    D = dct.new_dictionary(rng.standard_normal((4, 9)), normalize=True)
    assert list(dct.babel(D, 4)) == exhaustive_babel(D.gram, 4)


def test_babel_full_range():
    D = gen_dictionary(SynthConfig(5, 8, 1, dict_seed=9))
    assert list(dct.babel(D, 7)) == exhaustive_babel(D.gram, 7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(2, 12))
def test_babel_properties(seed, d, n):
    rng = np.random.default_rng(seed)
    D = dct.new_dictionary(rng.standard_normal((d, n)), normalize=True)
    b = dct.babel(D, n - 1)
    assert b[0] == 0.0
    assert b[1] == dct.coherence(D)
    assert np.all(np.diff(b) >= 0)
    mu = dct.coherence(D)
    assert -1e-10 <= mu <= 1 + 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_permutation_and_sign_invariance(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 10))
    D = dct.new_dictionary(A, normalize=True)
    perm = rng.permutation(10)
    signs = rng.choice([-1.0, 1.0], size=10)
    E = dct.new_dictionary(D.data[:, perm] * signs)
    assert dct.coherence(E) == pytest.approx(dct.coherence(D), abs=1e-14)
    np.testing.assert_allclose(dct.babel(E, 9), dct.babel(D, 9), rtol=0, atol=1e-14)


@pytest.mark.parametrize("mu,expected", [(1.0, 0), (1 / 3, 1), (0.0625, 8), (5.8e-2, 9), (0.2, 2)])
def test_m_star(mu, expected):
    assert dct._m_star_from_coherence(mu, 100) == expected
    m = expected
    assert m < 0.5 * (1 / mu + 1) <= m + 1


def test_m_star_zero_coherence_returns_n(identity4):
    assert dct.analyze(identity4).m_star == 4


def test_analyze_metrics():
    D = gen_dictionary(SynthConfig(200, 400, 1, dict_seed=1))
    M = dct.analyze(D)
    assert M.babel[1] == M.coherence
    assert len(M.babel) == M.m_star + 2
    assert dct.m_star(M) == M.m_star
    assert M.gram is D.gram


def test_erc_orthonormal(identity4):
    assert dct.erc(identity4, [0, 2]) == 0.0


def test_erc_hand_case(three_atoms):
    assert dct.erc(three_atoms, [0, 2]) == pytest.approx(math.sqrt(2), abs=1e-14)


def test_erc_rank_deficient():
    D = dct.new_dictionary(np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    with pytest.raises(RankDeficientSupport):
        dct.erc(D, [0, 1])


def test_erc_against_babel_bound():
    rng = np.random.default_rng(2024)
    D = gen_dictionary(SynthConfig(200, 400, 1, dict_seed=77))
    M = dct.analyze(D)
    for _ in range(100):
        m = int(rng.integers(1, M.m_star + 1))
        sup = rng.choice(400, size=m, replace=False)
        bound = M.babel[m] / (1 - M.babel[m - 1])
        value = dct.erc(D, sup)
        assert value <= bound + 1e-12
        assert bound < 1


def test_lambda_min_lower_bound():
    D = gen_dictionary(SynthConfig(200, 400, 1, dict_seed=14))
    M = dct.analyze(D)
    assert M.m_star == 2
    rng = np.random.default_rng(3)
    lb = dct.lambda_min_lower_bound(M, M.m_star)
    for _ in range(100):
        sup = rng.choice(400, size=M.m_star, replace=False)
        sv = np.linalg.svd(D.data[:, np.sort(sup)], compute_uv=False).min()
        # 1e-15 absorbs the unit-norm rounding of the atoms themselves
        assert lb <= sv + 1e-15
    ident = dct.analyze(dct.new_dictionary(np.eye(4)))
    assert dct.lambda_min_lower_bound(ident, 3) == 1.0


def test_lambda_min_arithmetic_and_vacuous():
    M = dct.DictionaryMetrics(0.36, np.array([0.0, 0.36, 1.2]), 1, 3, 3, np.eye(3))
    assert dct.lambda_min_lower_bound(M, 2) == pytest.approx(0.8, abs=1e-15)
    with pytest.raises(BoundVacuous):
        dct.lambda_min_lower_bound(M, 3)


def test_binary_roundtrip(tmp_path):
    D = gen_dictionary(SynthConfig(7, 5, 1, dict_seed=3))
    p = tmp_path / "d.bin"
    dct.save_dictionary(p, D)
    raw = p.read_bytes()
    assert raw[:8] == b"FWSPDICT" and len(raw) == 16 + 8 * 35
    assert int.from_bytes(raw[8:12], "little") == 7
    assert int.from_bytes(raw[12:16], "little") == 5
    # column-major: the first 7 doubles are atom 0
    np.testing.assert_array_equal(np.frombuffer(raw[16:16 + 56], "<f8"), D.data[:, 0])
    np.testing.assert_array_equal(dct.load_dictionary(p).data, D.data)


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,0.70710678118654757\n0,0.70710678118654757\n")
    D = dct.load_dictionary(p)
    assert D.shape == (2, 2)
    q = tmp_path / "e.csv"
    dct.save_csv(q, D)
    np.testing.assert_array_equal(dct.load_csv(q).data, D.data)


def test_truncated_binary(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"FWSPDICT" + (3).to_bytes(4, "little") + (3).to_bytes(4, "little") + b"\0" * 8)
    with pytest.raises(RangeError):
        dct.load_dictionary(p)
