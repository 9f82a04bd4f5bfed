"""Losses as virtual modes.

A lossy circuit matrix ``M`` (all singular values at most one) is embedded
in a unitary on twice the modes. Photons that are not transmitted end up
in the virtual loss modes, which are traced out after the simulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, GainError
from .state import State

CLAMP_TOL = 1e-10


@dataclass(frozen=True)
class DilatedCircuit:
    """Unitary on ``2n`` modes; modes ``n..2n-1`` are the loss modes."""

    U2n: np.ndarray
    n: int

    @property
    def physical_modes(self) -> range:
        return range(self.n)

    @property
    def loss_modes(self) -> range:
        return range(self.n, 2 * self.n)

    @property
    def M(self) -> np.ndarray:
        return self.U2n[: self.n, : self.n]


def dilate(M, tol: float = CLAMP_TOL) -> DilatedCircuit:
    """Build ``[[M, R sqrt(1-D^2) V], [R sqrt(1-D^2) V, -M]]`` from ``M = R D V``.

    Singular values up to ``1 + tol`` are clamped to one.

    Raises
    ------
    GainError
        If ``M`` amplifies (a singular value above ``1 + tol``).
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if M.shape != (n, n):
        raise DimensionError("only square matrices can be dilated")
    R, d, V = np.linalg.svd(M)
    if d.size and d.max() > 1.0 + tol:
        raise GainError(f"largest singular value {d.max():.12f} exceeds one")
    d = np.minimum(d, 1.0)
    # make R's diagonal real non-negative so the result is reproducible
    diag = np.diagonal(R).copy()
    phase = np.ones(n, dtype=complex)
    ok = np.abs(diag) > 1e-12
    phase[ok] = diag[ok] / np.abs(diag[ok])
    R = R * phase.conj()
    V = phase[:, None] * V
    B = (R * np.sqrt(1.0 - d ** 2)) @ V
    U2n = np.block([[M, B], [B, -M]])
    return DilatedCircuit(U2n, n)


def dilate_circuit(circuit) -> DilatedCircuit:
    """Dilate a circuit's post-emitter matrix and prepend the emitter.

    The emitter is only meaningful on occupied packets, so it is kept out
    of the singular value decomposition and acts trivially on loss modes.
    """
    dil = dilate(circuit.linear)
    if circuit.emitter is None:
        return dil
    n = dil.n
    E2 = np.eye(2 * n, dtype=complex)
    E2[:n, :n] = circuit.emitter
    return DilatedCircuit(dil.U2n @ E2, n)


def pad_state(state: State, nloss: int | None = None) -> State:
    """Append vacuum loss modes to every ket."""
    nloss = state.nmodes if nloss is None else nloss
    zeros = (0,) * nloss
    out = State(state.nmodes + nloss, max_occupation=state.max_occupation)
    for ket, amp in state.items():
        out._add_unchecked(amp, ket + zeros)
    return out


def _split(state: State, n: int):
    if state.nmodes != 2 * n:
        raise DimensionError(f"state has {state.nmodes} modes, expected {2 * n}")
    for ket, amp in state.items():
        yield ket[:n], ket[n:], amp


def loss_marginal(state: State, n: int) -> dict[tuple, float]:
    """Physical outcome probabilities, summed over loss-mode occupations."""
    bins: dict[tuple, float] = {}
    for phys, _, amp in _split(state, n):
        bins[phys] = bins.get(phys, 0.0) + abs(amp) ** 2
    return bins


def loss_components(state: State, n: int, labels=None) -> dict[tuple, State]:
    """Physical sub-states grouped by loss configuration.

    Different loss configurations are orthogonal, so the physical density
    matrix is the sum of the projectors on these (unnormalized) states.
    """
    parts: dict[tuple, State] = {}
    for phys, loss, amp in _split(state, n):
        st = parts.get(loss)
        if st is None:
            st = parts[loss] = State(n, labels=labels, max_occupation=state.max_occupation)
        st._add_unchecked(amp, phys)
    return parts


def trace_out_losses(state: State, dilated, kind: str = "bins", labels=None):
    """Remove the loss modes from a state on the doubled mode space.

    ``kind="bins"`` returns ``{physical ket: probability}``;
    ``kind="states"`` returns the per-loss-configuration physical states,
    which keep the coherences between kets sharing a loss configuration.
    """
    n = dilated.n if isinstance(dilated, DilatedCircuit) else int(dilated)
    if kind == "bins":
        return loss_marginal(state, n)
    if kind == "states":
        return loss_components(state, n, labels)
    raise ValueError(f"unknown kind {kind!r}")
