import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onebit_hankel.array_model import Snapshot, TargetScene, virtual_array
from onebit_hankel.errors import DomainError
from onebit_hankel.hankel import (
    ObservationSet,
    antidiagonal_lengths,
    build_hankel,
    dehankel,
    hankel_dims,
    verify_vandermonde_rank,
)

TX = [1, 19, 37, 55, 79, 91]
RX = [12, 22, 25, 39, 58, 62, 70, 73]


def loop_hankel(x, n1, n2):
    """Reference lift written as explicit loops."""
    H = np.empty((n1, n2), dtype=complex)
    for i in range(n1):
        for j in range(n2):
            H[i, j] = x[i + j]
    return H


@pytest.mark.parametrize("M,dims", [(7, (4, 4)), (152, (76, 77)), (1, (1, 1)), (2, (1, 2))])
def test_hankel_dims(M, dims):
    assert hankel_dims(M) == dims
    assert sum(dims) == M + 1


def test_hankel_dims_square_override():
    assert hankel_dims(152, square=True) == (76, 76)
    assert hankel_dims(7, square=True) == (4, 4)
    with pytest.raises(DomainError):
        hankel_dims(0)


def test_build_hankel_examples():
    H, om = build_hankel(np.array([1, 2, 3]))
    np.testing.assert_array_equal(H, [[1, 2], [2, 3]])
    assert om.m_prime == 4
    a, c = 2 + 1j, -3.0
    H, om = build_hankel(Snapshot([a, 0, c], [True, False, True]))
    np.testing.assert_array_equal(H, [[a, 0], [0, c]])
    assert sorted(om.pairs) == [(0, 0), (1, 1)]


def test_build_hankel_matches_loops():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(11) + 1j * rng.standard_normal(11)
    H, _ = build_hankel(x)
    np.testing.assert_array_equal(H, loop_hankel(x, 6, 6))
    H, _ = build_hankel(x, (4, 8))
    np.testing.assert_array_equal(H, loop_hankel(x, 4, 8))
    with pytest.raises(DomainError):
        build_hankel(x, (6, 7))


def test_radar_observation_count():
    g = virtual_array(TX, RX)
    snap = Snapshot(np.ones(g.M), g.mask)
    _, om = build_hankel(snap)
    # frozen from a double loop over (i, j) counting i + j - 1 in the virtual set
    assert om.shape == (76, 77)
    assert om.m_prime == 1943
    _, om_sq = build_hankel(snap, hankel_dims(g.M, square=True))
    assert om_sq.m_prime == 1918


@given(st.integers(1, 40), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40)
def test_observation_set_follows_antidiagonals(M, seed):
    rng = np.random.default_rng(seed)
    mask = rng.random(M) < 0.5
    _, om = build_hankel(Snapshot(np.ones(M), mask))
    n1, n2 = om.shape
    for i in range(n1):
        for j in range(n2):
            assert om.mask[i, j] == mask[i + j]
    assert om.m_prime == len(om.pairs) == len(set(om.pairs)) <= n1 * n2


def test_dehankel_examples():
    np.testing.assert_array_equal(dehankel(np.array([[1, 2], [2, 3]])), [1, 2, 3])
    np.testing.assert_array_equal(dehankel(np.array([[0, 4], [0, 3]])), [0, 2, 3])
    with pytest.raises(DomainError):
        dehankel(np.zeros((0, 3)))


@given(st.integers(1, 200), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=60)
def test_hankel_round_trip(M, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    H, _ = build_hankel(x)
    assert np.max(np.abs(dehankel(H) - x)) < 1e-14


def test_dehankel_is_antidiagonal_mean():
    rng = np.random.default_rng(0)
    H = rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7))
    out = dehankel(H)
    for k in range(11):
        vals = [H[i, k - i] for i in range(5) if 0 <= k - i < 7]
        assert out[k] == pytest.approx(np.mean(vals), abs=1e-14)


@given(st.integers(1, 30), st.integers(1, 30))
def test_antidiagonal_lengths_count_entries(n1, n2):
    lengths = antidiagonal_lengths(n1, n2)
    counts = np.bincount(np.add.outer(np.arange(n1), np.arange(n2)).ravel())
    np.testing.assert_array_equal(lengths, counts)
    assert lengths.sum() == n1 * n2


def test_observation_set_constructors():
    om = ObservationSet.from_pairs([(0, 1), (2, 2)], (3, 3))
    assert om.m_prime == 2 and len(om) == 2 and om.pairs == [(0, 1), (2, 2)]
    with pytest.raises(DomainError):
        ObservationSet.from_pairs([(3, 0)], (3, 3))
    u = ObservationSet.uniform((10, 10), 37, np.random.default_rng(0))
    assert u.m_prime == 37
    with pytest.raises(DomainError):
        ObservationSet.uniform((2, 2), 5, np.random.default_rng(0))
    assert ObservationSet.full((2, 3)).m_prime == 6


def test_vandermonde_rank_single_target():
    rank, s = verify_vandermonde_rank(TargetScene([23.0]), 8)
    assert rank == 1
    assert s[1] / s[0] < 1e-12


def test_vandermonde_rank_radar_scene():
    rank, s = verify_vandermonde_rank(TargetScene([-57, -34]), 152)
    assert rank == 2
    assert s[2] / s[0] < 1e-8


def test_vandermonde_rank_rejects_too_many_targets():
    with pytest.raises(DomainError):
        verify_vandermonde_rank(TargetScene([-40, -10, 10, 40]), 5)


@given(st.lists(st.floats(-85, 85), min_size=1, max_size=5))
@settings(max_examples=30)
def test_vandermonde_rank_equals_target_count(angles):
    u = np.sort(0.5 * np.sin(np.deg2rad(angles)))
    # identifiable only if spatial frequencies are well separated on a 64-element aperture
    if len(u) > 1 and np.min(np.diff(u)) < 0.05:
        return
    rank, _ = verify_vandermonde_rank(TargetScene(angles), 64, tol=1e-6)
    assert rank == len(angles)
