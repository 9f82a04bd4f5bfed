"""Imperfect quantum-dot photon-pair source.

Each emission draws one pure two-photon polarization state from the
branching tree of the biexciton-exciton cascade:

* entangled ``|HH> + e^{-i S dt}|VV>`` with probability ``k p_s p_d``,
* cross-dephased ``|HH>`` or ``|VV>`` with probability ``k p_s (1 - p_d)``,
* noise, any of ``|HH>, |HV>, |VH>, |VV>``, with probability ``1 - k p_s``,

where ``p_s = exp(-t/t_ss)``, ``p_d = exp(-t/t_hv)`` and ``dt`` is an
exponentially distributed delay. Averaging many runs reproduces the
source density matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .measurement import DensityMatrix
from .packets import EXPONENTIAL, PacketSpec
from .state import State

H, V = 0, 1
PAIR_BASIS = ((H, H), (H, V), (V, H), (V, V))


class Branch(enum.Enum):
    ENTANGLED = "entangled"
    DEPHASED_HH = "dephased_HH"
    DEPHASED_VV = "dephased_VV"
    NOISE_HH = "noise_HH"
    NOISE_HV = "noise_HV"
    NOISE_VH = "noise_VH"
    NOISE_VV = "noise_VV"


_NOISE = (Branch.NOISE_HH, Branch.NOISE_HV, Branch.NOISE_VH, Branch.NOISE_VV)


@dataclass(frozen=True)
class QDParams:
    """Quantum-dot cascade parameters.

    ``(t1, f1, w1)`` describe the biexciton (XX) photon sent to ``ch_xx``
    and ``(t2, f2, w2)`` the exciton (X) photon sent to ``ch_x``. For
    exponential packets ``w`` is the decay time. ``S`` is the fine
    structure splitting (natural units, so the phase is ``S * dt``).
    ``tau_delta`` is the mean of the random delay ``dt``; it defaults to
    the X photon decay time ``w2``.
    """

    ch_xx: int = 0
    ch_x: int = 1
    t1: float = 0.0
    f1: float = 1.0
    w1: float = 1.0
    t2: float = 0.0
    f2: float = 1.0
    w2: float = 1.0
    S: float = 0.0
    k: float = 1.0
    tss: float = 1.0
    thv: float = 1.0
    shape: str = EXPONENTIAL
    period: int = 0
    tau_delta: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.k <= 1.0:
            raise ValueError("k must be in [0, 1]")
        if not (self.tss > 0 and self.thv > 0):
            raise ValueError("tss and thv must be positive")
        if self.tau_delta is not None and not self.tau_delta > 0:
            raise ValueError("tau_delta must be positive")

    @property
    def mean_delay(self) -> float:
        return self.w2 if self.tau_delta is None else self.tau_delta

    @property
    def xx_packet(self) -> PacketSpec:
        return PacketSpec(self.shape, self.t1, self.f1, self.w1, self.period)

    @property
    def x_packet(self) -> PacketSpec:
        return PacketSpec(self.shape, self.t2, self.f2, self.w2, self.period)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if d["tau_delta"] is None:
            del d["tau_delta"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QDParams":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown QD fields {sorted(unknown)}")
        return cls(**d)


@dataclass
class EmittedState:
    """One draw from the source.

    ``pairs`` maps ``(pol_xx, pol_x)`` to an amplitude; ``state`` is the same
    fragment on the modes ``(XX H, XX V, X H, X V)``.
    """

    branch: Branch
    phase: complex
    pairs: dict[tuple[int, int], complex] = field(default_factory=dict)
    delay: float = 0.0

    @property
    def state(self) -> State:
        st = State(4)
        for (pa, pb), amp in self.pairs.items():
            ket = [0, 0, 0, 0]
            ket[pa] += 1
            ket[2 + pb] += 1
            st.add_term(amp, ket)
        return st


def qd_probabilities(p: QDParams, t: float) -> tuple[float, float]:
    """``(p_s, p_d)`` at time ``t``."""
    if t < 0:
        raise ValueError("time must be non-negative")
    return math.exp(-t / p.tss), math.exp(-t / p.thv)


def branch_weights(p: QDParams, t: float) -> dict[str, float]:
    """Probabilities of the entangled, dephased and noise branches."""
    ps, pd = qd_probabilities(p, t)
    return {
        "entangled": p.k * ps * pd,
        "dephased": p.k * ps * (1.0 - pd),
        "noise": 1.0 - p.k * ps,
    }


def sample_qd_pair(p: QDParams, rng=None, t: float | None = None) -> EmittedState:
    """Draw one photon pair.

    ``dt`` is drawn from an exponential distribution of mean
    ``p.mean_delay``; it sets the entangled phase and, unless ``t`` is
    given, the time entering ``p_s`` and ``p_d``.
    """
    rng = np.random.default_rng(rng)
    dt = float(rng.exponential(p.mean_delay))
    ps, pd = qd_probabilities(p, dt if t is None else t)
    u = rng.random()
    if u < p.k * ps * pd:
        phase = complex(math.cos(p.S * dt), -math.sin(p.S * dt))
        s = 1 / math.sqrt(2)
        return EmittedState(Branch.ENTANGLED, phase, {(H, H): s, (V, V): s * phase}, dt)
    if u < p.k * ps:
        if rng.random() < 0.5:
            return EmittedState(Branch.DEPHASED_HH, 1.0, {(H, H): 1.0}, dt)
        return EmittedState(Branch.DEPHASED_VV, 1.0, {(V, V): 1.0}, dt)
    i = int(rng.integers(4))
    return EmittedState(_NOISE[i], 1.0, {PAIR_BASIS[i]: 1.0}, dt)


def qd_density_matrix(p: QDParams, t: float | None = None) -> np.ndarray:
    """Expected source density matrix in the basis HH, HV, VH, VV.

    With ``t=None`` the branch weights and the phase are averaged over the
    exponential delay (``E[exp(-a dt)] = 1/(1 + a tau)``); with a fixed
    ``t`` only the phase is averaged.
    """
    tau = p.mean_delay
    a_s, a_d = 1 / p.tss, 1 / p.thv
    if t is None:
        e_s = 1 / (1 + a_s * tau)
        e_sd = 1 / (1 + (a_s + a_d) * tau)
        coh = p.k / (2 * (1 + (a_s + a_d) * tau - 1j * p.S * tau))
    else:
        ps, pd = qd_probabilities(p, t)
        e_s, e_sd = ps, ps * pd
        coh = p.k * e_sd / (2 * (1 - 1j * p.S * tau))
    noise = (1 - p.k * e_s) / 4
    rho = np.diag([p.k * e_s / 2 + noise, noise, noise, p.k * e_s / 2 + noise]).astype(complex)
    rho[0, 3] = coh
    rho[3, 0] = np.conj(coh)
    return rho


def accumulate_density(dm: DensityMatrix, out_state: State) -> DensityMatrix:
    """Add one run's post-selected state to ``dm``."""
    return dm.add_state(out_state)
