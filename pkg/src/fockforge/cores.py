"""Ket-by-ket transformation of states through a circuit matrix.

Two amplitude engines are available: ``"direct"`` expands the product of
creation-operator rules, ``"glynn"`` evaluates one permanent per output
ket. Both run over an output basis that is either every ket with the
input photon number (``full``), the ones with at most one photon per mode
(``restricted``) or an explicit list (``user``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DimensionError
from .permanent import glynn_permanent
from .state import MAX_OCCUPATION, PRUNE_TOL, State

CORES = ("direct", "glynn")


@dataclass(frozen=True)
class BasisSpec:
    """Output ensemble for a transformation."""

    mode: str = "full"
    kets: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        mode = self.mode.lower()
        if mode == "userlist":
            mode = "user"
        if mode not in ("full", "restricted", "user"):
            raise ValueError(f"unknown basis mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        if mode == "user":
            if self.kets is None:
                raise ValueError("a user basis needs an explicit ket list")
            object.__setattr__(self, "kets", tuple(tuple(int(n) for n in k) for k in self.kets))

    @classmethod
    def full(cls) -> "BasisSpec":
        return cls("full")

    @classmethod
    def restricted(cls) -> "BasisSpec":
        return cls("restricted")

    @classmethod
    def user(cls, kets) -> "BasisSpec":
        return cls("user", tuple(tuple(k) for k in kets))


def _as_basis(basis) -> BasisSpec:
    if basis is None:
        return BasisSpec.full()
    if isinstance(basis, BasisSpec):
        return basis
    if isinstance(basis, str):
        return BasisSpec(basis)
    return BasisSpec.user(basis)


def _compositions(n: int, m: int, cap: int):
    # weak compositions of n into m parts, lexicographically descending
    if m == 1:
        if n <= cap:
            yield (n,)
        return
    for first in range(min(n, cap), -1, -1):
        for rest in _compositions(n - first, m - 1, cap):
            yield (first,) + rest


@lru_cache(maxsize=64)
def _enumerate_cached(nmodes: int, nphotons: int, mode: str, cap: int):
    if mode == "restricted":
        cap = 1
    return tuple(_compositions(nphotons, nmodes, cap))


def enumerate_basis(nmodes: int, nphotons: int, basis=None,
                    max_occupation: int = MAX_OCCUPATION) -> list[tuple[int, ...]]:
    """Output kets with ``nphotons`` photons over ``nmodes`` modes.

    Full and restricted bases come out in descending lexicographic order.
    A restricted basis with more photons than modes is empty.
    """
    if nphotons < 0:
        raise ValueError("photon number must be non-negative")
    basis = _as_basis(basis)
    if nmodes == 0:
        return [()] if nphotons == 0 else []
    if basis.mode == "user":
        out = []
        for k in basis.kets:
            if len(k) != nmodes:
                raise DimensionError(f"basis ket {k} does not have {nmodes} modes")
            if sum(k) == nphotons:
                out.append(k)
        return out
    return list(_enumerate_cached(nmodes, nphotons, basis.mode, max_occupation))


@lru_cache(maxsize=None)
def _fact(n: int) -> float:
    return float(math.factorial(n))


def _occ_norm(ket) -> float:
    p = 1.0
    for n in ket:
        if n > 1:
            p *= _fact(n)
    return p


def _repeat_index(ket) -> np.ndarray:
    return np.repeat(np.arange(len(ket)), ket)


def amplitude(input_ket: Sequence[int], output_ket: Sequence[int], U) -> complex:
    """``<output|T|input>`` via the permanent of the repeated sub-matrix.

    Kets with different photon numbers have zero amplitude.
    """
    U = np.asarray(U, dtype=complex)
    m = U.shape[0]
    if len(input_ket) != m or len(output_ket) != m:
        raise DimensionError(f"kets must have {m} modes")
    n = sum(input_ket)
    if sum(output_ket) != n:
        return 0j
    if n == 0:
        return 1.0 + 0j
    sub = U[np.ix_(_repeat_index(output_ket), _repeat_index(input_ket))]
    return glynn_permanent(sub) / math.sqrt(_occ_norm(input_ket) * _occ_norm(output_ket))


def glynn_ket_transform(ket: Sequence[int], U, basis=None) -> State:
    """Transform one ket by evaluating a permanent per basis ket."""
    U = np.asarray(U, dtype=complex)
    m = U.shape[0]
    ket = tuple(int(x) for x in ket)
    if len(ket) != m:
        raise DimensionError(f"ket has {len(ket)} modes, matrix has {m}")
    n = sum(ket)
    out = State(m, max_occupation=max(MAX_OCCUPATION, n))
    cols = U[:, _repeat_index(ket)]
    in_norm = _occ_norm(ket)
    for target in enumerate_basis(m, n, basis, max(MAX_OCCUPATION, n)):
        rows = _repeat_index(target)
        amp = glynn_permanent(cols[rows]) / math.sqrt(in_norm * _occ_norm(target))
        if abs(amp) >= PRUNE_TOL:
            out._add_unchecked(amp, target)
    return out


def direct_ket_transform(ket: Sequence[int], U, basis=None) -> State:
    """Transform one ket by expanding products of creation-operator rules.

    Each input photon in mode ``j`` becomes ``sum_k U[k, j] a_k^dagger``;
    the product over photons is expanded one photon at a time, merging
    partial index sequences that reach the same occupation. Zero matrix
    entries prune their branch.
    """
    U = np.asarray(U, dtype=complex)
    m = U.shape[0]
    ket = tuple(int(x) for x in ket)
    if len(ket) != m:
        raise DimensionError(f"ket has {len(ket)} modes, matrix has {m}")
    basis = _as_basis(basis)
    n = sum(ket)
    cap = 1 if basis.mode == "restricted" else n
    if basis.mode == "user":
        targets = set(enumerate_basis(m, n, basis))
        if not targets:
            return State(m)
        caps = [max(t[k] for t in targets) for k in range(m)]
    else:
        targets = None
        caps = [cap] * m

    partial: dict[tuple, complex] = {(0,) * m: 1.0 / math.sqrt(_occ_norm(ket))}
    for j, nj in enumerate(ket):
        if nj == 0:
            continue
        col = U[:, j]
        nz = [(k, complex(col[k])) for k in range(m) if col[k] != 0]
        for _ in range(nj):
            nxt: dict[tuple, complex] = {}
            for occ, amp in partial.items():
                for k, u in nz:
                    if occ[k] >= caps[k]:
                        continue
                    new = occ[:k] + (occ[k] + 1,) + occ[k + 1:]
                    nxt[new] = nxt.get(new, 0j) + amp * u
            partial = nxt

    out = State(m, max_occupation=max(MAX_OCCUPATION, n))
    for occ, amp in partial.items():
        if targets is not None and occ not in targets:
            continue
        amp = amp * math.sqrt(_occ_norm(occ))
        if abs(amp) >= PRUNE_TOL:
            out._add_unchecked(amp, occ)
    return out


_KET_ENGINES = {"direct": direct_ket_transform, "glynn": glynn_ket_transform}


def ket_transform(ket, U, core: str = "glynn", basis=None) -> State:
    try:
        engine = _KET_ENGINES[core.lower()]
    except KeyError:
        raise ValueError(f"unknown core {core!r}; choose from {CORES}") from None
    return engine(ket, U, basis)


def _matrix_of(circuit) -> np.ndarray:
    if hasattr(circuit, "U"):
        return np.asarray(circuit.U, dtype=complex)
    return np.asarray(circuit, dtype=complex)


def transform(state: State, circuit, core: str = "glynn", basis=None,
              cache: dict | None = None) -> State:
    """``sum_i alpha_i T(|phi_i>)`` restricted to the output basis.

    Parameters
    ----------
    state : State
        Input superposition on the matrix's mode space.
    circuit : Circuit or array
        A circuit (its ``U`` is used) or a square matrix.
    core : {"direct", "glynn"}
    basis : BasisSpec, str or list of kets, optional
        Defaults to the full photon-number-conserving basis.
    cache : dict, optional
        Per-ket images keyed by input ket; reuse it only across calls with
        the same matrix, core and basis.
    """
    U = _matrix_of(circuit)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError("circuit matrix must be square")
    if state.nmodes != U.shape[0]:
        raise DimensionError(
            f"state has {state.nmodes} modes, circuit matrix has {U.shape[0]}"
        )
    basis = _as_basis(basis)
    if basis.mode == "user":
        for k in basis.kets:
            if len(k) != U.shape[0]:
                raise DimensionError(f"basis ket {k} does not match {U.shape[0]} modes")
        photon_numbers = state.photon_numbers()
        for k in basis.kets:
            if sum(k) not in photon_numbers:
                raise DimensionError(
                    f"basis ket {k} has {sum(k)} photons; input has {sorted(photon_numbers)}"
                )
    maxn = max(state.photon_numbers(), default=0)
    out = State(U.shape[0], labels=state.labels, max_occupation=max(MAX_OCCUPATION, maxn))
    for ket, alpha in state.items():
        if alpha == 0:
            continue
        if cache is None:
            image = ket_transform(ket, U, core, basis)
        else:
            image = cache.get(ket)
            if image is None:
                image = cache[ket] = ket_transform(ket, U, core, basis)
        for target, beta in image.items():
            out._add_unchecked(alpha * beta, target)
    return out.prune()
