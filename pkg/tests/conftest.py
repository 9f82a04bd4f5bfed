import itertools
import math

import numpy as np
import pytest


def permutation_sum(a):
    """Permanent as the plain sum over permutations."""
    a = np.asarray(a)
    n = a.shape[0]
    perms = itertools.permutations(range(n))
    return complex(sum(math.prod(a[i, p[i]] for i in range(n)) for p in perms))


def brute_amplitude(ket_in, ket_out, U):
    """Amplitude from the permutation-sum permanent of the repeated sub-matrix."""
    rows = [i for i, n in enumerate(ket_out) for _ in range(n)]
    cols = [j for j, n in enumerate(ket_in) for _ in range(n)]
    if len(rows) != len(cols):
        return 0j
    if not rows:
        return 1 + 0j
    norm = math.prod(math.factorial(n) for n in ket_in) * math.prod(math.factorial(n) for n in ket_out)
    return permutation_sum(np.asarray(U)[np.ix_(rows, cols)]) / math.sqrt(norm)


def all_kets(nmodes, nphotons):
    for c in itertools.product(range(nphotons + 1), repeat=nmodes):
        if sum(c) == nphotons:
            yield c


def brute_distribution(ket_in, U):
    """Exact output distribution by enumerating every ket with the same photon number."""
    m = len(ket_in)
    n = sum(ket_in)
    out = {}
    for k in all_kets(m, n):
        p = abs(brute_amplitude(ket_in, k, U)) ** 2
        if p > 1e-15:
            out[k] = p
    return out


def bs_table(theta_deg, phi_deg):
    """Symbolic two-photon beamsplitter expansions, evaluated numerically."""
    c, s = math.cos(math.radians(theta_deg)), math.sin(math.radians(theta_deg))
    e = np.exp(1j * math.radians(phi_deg))
    r2 = math.sqrt(2)
    return {
        (1, 0): {(1, 0): c, (0, 1): s / e},
        (0, 1): {(1, 0): -e * s, (0, 1): c},
        (1, 1): {(2, 0): -r2 * e * c * s, (1, 1): c * c - s * s, (0, 2): r2 / e * c * s},
        (2, 0): {(2, 0): c * c, (1, 1): r2 / e * c * s, (0, 2): s * s / e ** 2},
        (0, 2): {(2, 0): e ** 2 * s * s, (1, 1): -r2 * e * c * s, (0, 2): c * c},
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
