"""Wavepackets and partial distinguishability.

Photons carry a packet label as part of their mode. Physical packets
overlap, so before simulation they are rewritten in an orthonormal packet
basis (Gram-Schmidt). The change of basis is applied as a linear "emitter"
element; delays are relabelings of packets between time periods.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import CapacityError, DegeneratePacketError, ElementError

GAUSSIAN = "gaussian"
EXPONENTIAL = "exponential"
SHAPES = (GAUSSIAN, EXPONENTIAL)
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class PacketSpec:
    """Parameters of one wavepacket.

    ``t`` is the central time (Gaussian) or the emission onset
    (exponential), ``f`` the central frequency, and ``w`` the frequency
    width for Gaussian packets or the decay time for exponential ones.
    ``period`` selects the time period the packet is placed in.
    """

    shape: str = GAUSSIAN
    t: float = 0.0
    f: float = 1.0
    w: float = 1.0
    period: int = 0

    def __post_init__(self):
        shape = str(self.shape).lower()
        if shape in ("g", "gauss"):
            shape = GAUSSIAN
        elif shape in ("e", "exp"):
            shape = EXPONENTIAL
        if shape not in SHAPES:
            raise ElementError(f"unknown packet shape {self.shape!r}")
        object.__setattr__(self, "shape", shape)
        if not self.w > 0:
            raise ElementError("packet width / decay time must be positive")
        if self.period < 0:
            raise ElementError("packet period must be non-negative")

    @property
    def tau(self) -> float:
        return self.w

    def base(self) -> "PacketSpec":
        """Same packet in period zero."""
        return PacketSpec(self.shape, self.t, self.f, self.w, 0)

    def key(self) -> tuple:
        return (self.shape, float(self.t), float(self.f), float(self.w), int(self.period))

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.shape == EXPONENTIAL:
            d["tau"] = d.pop("w")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PacketSpec":
        w = d.get("w", d.get("tau", 1.0))
        return cls(
            d.get("shape", GAUSSIAN), float(d.get("t", 0.0)), float(d.get("f", 1.0)),
            float(w), int(d.get("period", 0)),
        )

    def wavefunction(self, t):
        """Normalized time-domain amplitude, vectorized over ``t``."""
        t = np.asarray(t, dtype=float)
        s = t - self.t
        if self.shape == GAUSSIAN:
            norm = (2.0 / math.pi) ** 0.25 * math.sqrt(self.w)
            return norm * np.exp(-(s ** 2) * self.w ** 2) * np.exp(-1j * self.f * s)
        env = np.where(s >= 0, np.exp(-np.clip(s, 0, None) / (2 * self.w)), 0.0)
        return env / math.sqrt(self.w) * np.exp(-1j * self.f * s)


def _gaussian_overlap(a: PacketSpec, b: PacketSpec) -> complex:
    # shifted variable s = t - a.t keeps the exponent small for late packets
    da2, db2 = a.w ** 2, b.w ** 2
    A = da2 + db2
    d = b.t - a.t
    dw = a.f - b.f
    re = -da2 * db2 * d * d / A - dw * dw / (4 * A)
    im = db2 * d * dw / A + b.f * d
    pref = math.sqrt(2.0 / math.pi) * math.sqrt(a.w * b.w) * math.sqrt(math.pi / A)
    return complex(pref * math.exp(re) * complex(math.cos(im), math.sin(im)))


def _exponential_overlap(a: PacketSpec, b: PacketSpec) -> complex:
    T = max(a.t, b.t)
    kappa = complex(1 / (2 * a.w) + 1 / (2 * b.w), -(a.f - b.f))
    re = -(T - a.t) / (2 * a.w) - (T - b.t) / (2 * b.w)
    im = a.f * (T - a.t) - b.f * (T - b.t)
    val = math.exp(re) * complex(math.cos(im), math.sin(im)) / kappa
    return complex(val / math.sqrt(a.w * b.w))


def packet_overlap(a: PacketSpec, b: PacketSpec) -> complex:
    """``<a|b>`` for two packets of the same shape.

    Period offsets are not included; packets in different periods are
    treated as orthogonal by the emitter.
    """
    if a.shape != b.shape:
        raise ElementError("overlap between Gaussian and exponential packets is unsupported")
    if a.shape == GAUSSIAN:
        return _gaussian_overlap(a, b)
    return _exponential_overlap(a, b)


def overlap_matrix(packets) -> np.ndarray:
    n = len(packets)
    G = np.eye(n, dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            g = packet_overlap(packets[i], packets[j])
            G[i, j] = g
            G[j, i] = g.conjugate()
    return G


def gram_schmidt(G: np.ndarray, tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Coefficients of the physical packets in the orthonormalized basis.

    Row ``i`` of the returned lower-triangular matrix holds
    ``c[i, k] = <P~_k|P_i>`` so that ``|P_i> = sum_k c[i, k] |P~_k>``,
    given ``G[i, j] = <P_i|P_j>``.

    Raises
    ------
    DegeneratePacketError
        If a packet lies (within ``tol``) in the span of earlier ones.
    """
    G = np.asarray(G, dtype=complex)
    n = G.shape[0]
    if G.shape != (n, n):
        raise ValueError("overlap matrix must be square")
    C = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for k in range(i):
            acc = G[k, i] - np.dot(C[k, :k].conj(), C[i, :k])
            C[i, k] = acc / C[k, k]
        resid = G[i, i].real - float(np.sum(np.abs(C[i, :i]) ** 2))
        if resid < tol:
            raise DegeneratePacketError(i, math.sqrt(max(resid, 0.0)))
        C[i, i] = math.sqrt(resid)
    return C


def emitter_block(packets, capacity: int | None = None) -> np.ndarray:
    """Packet-space matrix mapping physical packets to the orthonormal basis.

    Uses the circuit convention ``M[out, in]``, i.e. the transpose of the
    Gram-Schmidt coefficient matrix. Unused table slots map to themselves.
    """
    n = len(packets)
    capacity = n if capacity is None else capacity
    if n > capacity:
        raise CapacityError(f"{n} packets exceed a table of {capacity}")
    M = np.eye(capacity, dtype=complex)
    if n:
        M[:n, :n] = gram_schmidt(overlap_matrix(packets)).T
    return M


def emitter_matrix(circuit) -> np.ndarray:
    """Full-mode emitter matrix for ``circuit``'s registered packet table.

    Acts identically on every channel and polarization and repeats the
    same block in every period.
    """
    modes = circuit.modes
    per = circuit.packets_per_period
    block = emitter_block(circuit.packets, per)
    M = np.eye(modes.nmodes, dtype=complex)
    for ch in range(modes.nchannels):
        for pol in range(modes.npol):
            for p in range(circuit.nperiods):
                idx = [modes.index(ch, pol, p * per + k) for k in range(per)]
                M[np.ix_(idx, idx)] = block
    return M


def delay_matrix(circuit, channel: int, periods: int) -> np.ndarray:
    """Move every packet on ``channel`` forward by ``periods`` time periods.

    Labels that would run past the last period wrap to the first one so the
    matrix stays a permutation; the last ``periods`` periods are assumed
    empty on that channel.
    """
    modes = circuit.modes
    if not 0 <= channel < modes.nchannels:
        raise ElementError(f"channel {channel} out of range")
    nper = circuit.nperiods
    if abs(periods) >= nper and periods != 0:
        raise CapacityError(
            f"delay of {periods} periods needs more than the {nper} periods declared"
        )
    per = circuit.packets_per_period
    M = np.eye(modes.nmodes, dtype=complex)
    if periods == 0:
        return M
    for pol in range(modes.npol):
        src = [modes.index(channel, pol, d) for d in range(modes.npackets)]
        M[np.ix_(src, src)] = 0.0
        for d in range(modes.npackets):
            p, k = divmod(d, per)
            d2 = ((p + periods) % nper) * per + k
            M[modes.index(channel, pol, d2), modes.index(channel, pol, d)] = 1.0
    return M
