import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isacdet.constellation import ALL_KINDS, ConstellationKind, alphabet, draw_symbols
from oracles import qam_fourth_moment_enumerated


def test_exactly_six_kinds():
    assert [k.value for k in ConstellationKind] == [
        "bpsk", "qpsk", "qam16", "qam64", "qam256", "qam1024"]


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_unit_average_power_and_distinct(kind):
    pts = alphabet(kind).points
    assert len(pts) == kind.order
    assert abs(np.mean(np.abs(pts) ** 2) - 1.0) < 1e-12
    assert len(np.unique(np.round(pts, 12))) == len(pts)


@pytest.mark.parametrize("kind", [ConstellationKind.BPSK, ConstellationKind.QPSK])
def test_psk_unit_modulus(kind):
    assert np.all(np.abs(np.abs(alphabet(kind).points) - 1.0) < 1e-12)


def test_bpsk_qpsk_points():
    assert np.allclose(alphabet("bpsk").points, [1, -1])
    expected = {complex(a, b) / np.sqrt(2) for a in (1, -1) for b in (1, -1)}
    got = alphabet("qpsk").points
    assert all(min(abs(g - e) for e in expected) < 1e-12 for g in got)


def test_qam16_levels_by_enumeration():
    pts = alphabet("qam16").points * np.sqrt(10)
    assert set(np.round(pts.real, 12)) == {-3, -1, 1, 3}
    assert set(np.round(pts.imag, 12)) == {-3, -1, 1, 3}


def test_qam1024_scale():
    pts = alphabet("qam1024").points
    # smallest level is 1 * scale; 2(L^2-1)/3 = 682 for L = 32
    assert np.min(np.abs(pts.real)) == pytest.approx(1 / np.sqrt(682), rel=1e-12)
    levels = np.arange(-31, 32, 2)
    brute = np.mean([a * a + b * b for a in levels for b in levels])
    assert brute == pytest.approx(682)


def test_ordering_row_major_i_then_q():
    pts = alphabet("qam16").points * np.sqrt(10)
    assert pts[0] == pytest.approx(-3 - 3j)
    assert pts[1] == pytest.approx(-3 - 1j)
    assert pts[4] == pytest.approx(-1 - 3j)


def test_draw_symbols_membership_and_shape():
    H = draw_symbols("bpsk", 4, 1, np.random.default_rng(1))
    assert H.shape == (4, 1)
    assert set(H.ravel().tolist()) <= {1 + 0j, -1 + 0j}


def test_draw_symbols_deterministic():
    a = draw_symbols("qam16", 512, 1, np.random.default_rng(7))
    b = draw_symbols("qam16", 512, 1, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("n,m", [(0, 1), (1, 0)])
def test_draw_symbols_rejects_empty(n, m):
    with pytest.raises(ValueError):
        draw_symbols("qpsk", n, m, np.random.default_rng(0))


def test_qam64_power_law_of_large_numbers():
    H = draw_symbols("qam64", 1000, 1000, np.random.default_rng(3))
    assert np.mean(np.abs(H) ** 2) == pytest.approx(1.0, abs=0.01)


def test_qam16_fourth_moment():
    assert qam_fourth_moment_enumerated(16) == pytest.approx(1.32, abs=1e-12)
    H = draw_symbols("qam16", 1000, 1000, np.random.default_rng(4))
    assert np.mean(np.abs(H) ** 4) == pytest.approx(1.32, abs=0.02)


@pytest.mark.parametrize("kind", [k for k in ALL_KINDS if not k.is_psk])
def test_fourth_moment_matches_enumeration(kind):
    assert alphabet(kind).power_moment(2) == pytest.approx(
        qam_fourth_moment_enumerated(kind.order), rel=1e-12)


def test_unknown_name():
    with pytest.raises(ValueError, match="unknown constellation"):
        alphabet("qam32")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(ALL_KINDS),
       n=st.integers(1, 16), m=st.integers(1, 4))
def test_draw_is_pure_function_of_seed(seed, kind, n, m):
    a = draw_symbols(kind, n, m, np.random.default_rng(seed))
    b = draw_symbols(kind, n, m, np.random.default_rng(seed))
    np.testing.assert_array_equal(a, b)
    pts = alphabet(kind).points
    assert np.all(np.min(np.abs(a.ravel()[:, None] - pts[None, :]), axis=1) < 1e-12)
