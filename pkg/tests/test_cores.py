import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockforge.circuit import Circuit, beamsplitter_matrix, haar_unitary
from fockforge.cores import (BasisSpec, amplitude, direct_ket_transform, enumerate_basis,
                             glynn_ket_transform, transform)
from fockforge.errors import DimensionError
from fockforge.state import State

from conftest import brute_amplitude, bs_table

CORES = ("glynn", "direct")


@pytest.mark.parametrize("core", CORES)
@pytest.mark.parametrize("theta", [30.0, 45.0, 60.0, 17.0])
@pytest.mark.parametrize("phi", [0.0, 90.0, 33.0])
def test_two_photon_beamsplitter_table(core, theta, phi):
    U = beamsplitter_matrix(theta, phi)
    for ket_in, expansion in bs_table(theta, phi).items():
        out = transform(State.basis(ket_in), U, core)
        for ket_out, amp in expansion.items():
            assert out.amplitude(ket_out) == pytest.approx(amp, abs=1e-12)


@pytest.mark.parametrize("core", CORES)
def test_hom_bunching(core):
    out = transform(State.basis([1, 1]), Circuit(2).beamsplitter(0, 1, 45, 0), core)
    s = 1 / math.sqrt(2)
    assert out.isclose(State(2, [(-s, [2, 0]), (s, [0, 2])]), atol=1e-15)


@pytest.mark.parametrize("core", CORES)
def test_identity_circuit(core):
    st_in = State(3, [(0.6, [1, 0, 2]), (0.8j, [0, 3, 0])])
    assert transform(st_in, np.eye(3), core).isclose(st_in, atol=1e-15)


@pytest.mark.parametrize("core", CORES)
def test_vacuum(core):
    out = transform(State.basis([0, 0, 0]), haar_unitary(3, 1), core)
    assert out.amplitude([0, 0, 0]) == pytest.approx(1.0)


def test_nsx_post_selected_amplitudes():
    c = Circuit(3).nsx(0, 1, 2)
    for n, expected in ((0, 0.5), (1, 0.5), (2, -0.5)):
        out = transform(State.basis([n, 1, 0]), c)
        assert out.amplitude([n, 1, 0]) == pytest.approx(expected, abs=1e-7)


def test_amplitude_bs_coincidence():
    for theta in (10.0, 30.0, 45.0, 70.0):
        U = beamsplitter_matrix(theta, 25.0)
        c, s = math.cos(math.radians(theta)), math.sin(math.radians(theta))
        assert amplitude([1, 1], [1, 1], U) == pytest.approx(c * c - s * s, abs=1e-14)


def test_amplitude_photon_mismatch_is_zero():
    assert amplitude([1, 0], [1, 1], np.eye(2)) == 0
    assert amplitude([1, 0], [0, 1], np.eye(2)) == 0


def test_random_four_photon_amplitude_matches_oracle(rng):
    U = haar_unitary(5, rng)
    ket_in, ket_out = (2, 1, 0, 1, 0), (0, 1, 1, 0, 2)
    ref = brute_amplitude(ket_in, ket_out, U)
    assert amplitude(ket_in, ket_out, U) == pytest.approx(ref, abs=1e-13)
    assert direct_ket_transform(ket_in, U).amplitude(ket_out) == pytest.approx(ref, abs=1e-13)


def test_enumerate_basis_counts():
    assert enumerate_basis(2, 2) == [(2, 0), (1, 1), (0, 2)]
    assert len(enumerate_basis(4, 2, "restricted")) == 6
    assert len(enumerate_basis(12, 6)) == math.comb(17, 6) == 12376
    assert enumerate_basis(2, 3, "restricted") == []


def test_enumerate_basis_is_sorted_descending():
    kets = enumerate_basis(4, 3)
    assert kets == sorted(kets, reverse=True)
    assert len(set(kets)) == len(kets)


def test_user_basis():
    U = haar_unitary(3, 0)
    basis = BasisSpec.user([(1, 1, 0), (0, 0, 2)])
    for core in CORES:
        out = transform(State.basis([1, 0, 1]), U, core, basis)
        assert set(out.kets()) <= {(1, 1, 0), (0, 0, 2)}
        assert out.amplitude([1, 1, 0]) == pytest.approx(amplitude([1, 0, 1], [1, 1, 0], U))


def test_user_basis_wrong_photon_number_raises():
    with pytest.raises(DimensionError):
        transform(State.basis([1, 0]), np.eye(2), basis=BasisSpec.user([(1, 1)]))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        transform(State.basis([1, 0]), np.eye(3))


def test_unknown_core():
    with pytest.raises(ValueError):
        transform(State.basis([1, 0]), np.eye(2), "ryser")


def test_cache_reuse_is_transparent():
    U = haar_unitary(4, 3)
    s = State(4, [(0.6, [1, 1, 0, 0]), (0.8, [0, 0, 1, 1])])
    cache = {}
    a = transform(s, U, cache=cache)
    b = transform(s, U, cache=cache)
    assert len(cache) == 2
    assert a.isclose(b, atol=0)


ket_strategy = st.integers(2, 5).flatmap(
    lambda m: st.lists(st.integers(0, 2), min_size=m, max_size=m).filter(lambda k: 0 < sum(k) <= 4)
)


@settings(max_examples=40, deadline=None)
@given(ket_strategy, st.integers(0, 10_000))
def test_cores_agree_and_conserve_probability(ket, seed):
    U = haar_unitary(len(ket), np.random.default_rng(seed))
    g = glynn_ket_transform(ket, U)
    d = direct_ket_transform(ket, U)
    assert g.isclose(d, atol=1e-10)
    assert g.norm2() == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(ket_strategy, st.integers(0, 10_000))
def test_restricted_is_filtered_full(ket, seed):
    U = haar_unitary(len(ket), np.random.default_rng(seed))
    full = transform(State.basis(ket), U)
    for core in CORES:
        restricted = transform(State.basis(ket), U, core, "restricted")
        expected = State(len(ket), [(a, k) for k, a in full.items() if max(k) <= 1])
        assert restricted.isclose(expected, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(ket_strategy, ket_strategy, st.complex_numbers(max_magnitude=2, allow_nan=False,
                                                      allow_infinity=False),
       st.integers(0, 10_000))
def test_linearity(k1, k2, alpha, seed):
    m = max(len(k1), len(k2))
    k1 = list(k1) + [0] * (m - len(k1))
    k2 = list(k2) + [0] * (m - len(k2))
    U = haar_unitary(m, np.random.default_rng(seed))
    combo = State(m, [(alpha, k1), (1.0, k2)])
    lhs = transform(combo, U)
    rhs = transform(State.basis(k1), U) * alpha + transform(State.basis(k2), U)
    assert lhs.isclose(rhs.prune(), atol=1e-10)
