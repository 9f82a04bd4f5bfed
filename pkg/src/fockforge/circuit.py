"""Circuit matrices built from element lists.

Each element contributes a local matrix that is embedded into the identity
on the full mode space and left-multiplied onto the running circuit matrix,
so ``U = U_n ... U_2 U_1``. Modes are ``(channel, polarization, packet)``
triples laid out as ``((channel * npol) + pol) * npackets + packet``.

Matrices follow the creation-operator convention: column ``j`` lists the
output amplitudes of a photon entering mode ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import packets as _packets
from .errors import CapacityError, DimensionError, ElementError
from .packets import PacketSpec

UNITARY_TOL = 1e-10

# kinds acting on whole channels (every polarization / packet sub-mode alike)
CHANNEL_KINDS = {
    "beamsplitter": None,
    "dielectric": 2,
    "mmi2": 2,
    "rewire": 2,
    "phase_shifter": 1,
    "loss": 1,
    "nsx": 3,
    "unitary": None,
    "random": None,
}
POLARIZATION_KINDS = {"rotator", "half", "quarter"}
OTHER_KINDS = {"polbeamsplitter", "delay"}
KINDS = set(CHANNEL_KINDS) | POLARIZATION_KINDS | OTHER_KINDS

NSX_ANGLE = 65.5302


@dataclass(frozen=True)
class ModeMap:
    """Bijection between mode indices and ``(channel, polarization, packet)``."""

    nchannels: int
    npol: int = 1
    npackets: int = 1

    def __post_init__(self):
        if self.nchannels < 1:
            raise DimensionError("a circuit needs at least one channel")
        if self.npol not in (1, 2):
            raise DimensionError("npol must be 1 or 2")
        if self.npackets < 1:
            raise DimensionError("npackets must be positive")

    @property
    def nmodes(self) -> int:
        return self.nchannels * self.npol * self.npackets

    def index(self, channel: int, pol: int = 0, packet: int = 0) -> int:
        if not (0 <= channel < self.nchannels and 0 <= pol < self.npol
                and 0 <= packet < self.npackets):
            raise DimensionError(f"mode ({channel}, {pol}, {packet}) out of range")
        return (channel * self.npol + pol) * self.npackets + packet

    def label(self, mode: int) -> tuple[int, int, int]:
        if not 0 <= mode < self.nmodes:
            raise DimensionError(f"mode {mode} out of range")
        rest, packet = divmod(mode, self.npackets)
        channel, pol = divmod(rest, self.npol)
        return channel, pol, packet

    def labels(self) -> list[tuple[int, int, int]]:
        return [self.label(m) for m in range(self.nmodes)]

    def channel_modes(self, channel: int) -> list[int]:
        return [self.index(channel, p, k) for p in range(self.npol) for k in range(self.npackets)]


@dataclass(frozen=True)
class ElementSpec:
    """One entry of a circuit description.

    Angles are in degrees. Complex parameters (``t``, ``r``) may be given as
    numbers or ``[re, im]`` pairs.
    """

    kind: str
    channels: tuple[int, ...]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ElementError(f"unknown element kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        chans = tuple(int(c) for c in self.channels)
        if len(set(chans)) != len(chans):
            raise ElementError(f"{kind}: channels must be distinct, got {chans}")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "params", dict(self.params))

    def to_dict(self) -> dict:
        params = {}
        for k, v in self.params.items():
            if isinstance(v, complex):
                v = [v.real, v.imag]
            elif isinstance(v, np.ndarray):
                v = [[[z.real, z.imag] for z in row] for row in v]
            params[k] = v
        return {"kind": self.kind, "ch": list(self.channels), "params": params}

    @classmethod
    def from_dict(cls, d: dict) -> "ElementSpec":
        return cls(d["kind"], tuple(d.get("ch", d.get("channels", ()))), d.get("params", {}))


@dataclass
class DetectorSpec:
    """Detector placed at the end of a channel.

    ``condition`` is the required photon count (summed over polarization and
    packets) or None for an unconditioned detector. ``kind`` is one of
    ``"counter"``, ``"timed"`` or ``"full"``.
    """

    channel: int
    condition: int | None = None
    efficiency: float = 1.0
    dead_fraction: float = 0.0
    dark_rate: float = 0.0
    kind: str = "counter"

    def __post_init__(self):
        if self.condition is not None and self.condition < 0:
            raise ElementError("detector condition must be non-negative")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ElementError("detector efficiency must be in [0, 1]")
        if not 0.0 <= self.dead_fraction <= 1.0:
            raise ElementError("dead-time fraction must be in [0, 1]")
        if self.dark_rate < 0:
            raise ElementError("dark-count rate must be non-negative")
        if self.kind not in ("counter", "timed", "full"):
            raise ElementError(f"unknown detector kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "ch": self.channel, "cond": self.condition, "eff": self.efficiency,
            "blnk": self.dead_fraction, "gamma": self.dark_rate, "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorSpec":
        return cls(
            int(d["ch"]), d.get("cond"), float(d.get("eff", 1.0)),
            float(d.get("blnk", 0.0)), float(d.get("gamma", 0.0)), d.get("kind", "counter"),
        )


def _cplx(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1] if len(v) > 1 else 0.0)
    return complex(v)


def _matrix_param(v) -> np.ndarray:
    arr = np.asarray(v)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        arr = arr[..., 0] + 1j * arr[..., 1]
    return np.asarray(arr, dtype=complex)


def beamsplitter_matrix(theta: float, phi: float) -> np.ndarray:
    """Beamsplitter with angles in degrees."""
    th, ph = math.radians(theta), math.radians(phi)
    c, s = math.cos(th), math.sin(th)
    return np.array(
        [[c, -np.exp(1j * ph) * s], [np.exp(-1j * ph) * s, c]], dtype=complex
    )


def haar_unitary(n: int, rng=None) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    rng = np.random.default_rng(rng)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def _nsx_local() -> np.ndarray:
    m = np.eye(3, dtype=complex)
    for kind, ch, args in (
        ("ps", (0,), (180.0,)),
        ("bs", (1, 2), (22.5, 0.0)),
        ("bs", (0, 1), (NSX_ANGLE, 0.0)),
        ("bs", (1, 2), (-22.5, 0.0)),
    ):
        if kind == "ps":
            local = np.array([[np.exp(1j * math.radians(args[0]))]])
        else:
            local = beamsplitter_matrix(*args)
        m = embed(3, local, ch) @ m
    return m


def elem_matrix(spec: ElementSpec) -> np.ndarray:
    """Local matrix of an element.

    Channel elements return a ``k x k`` matrix over their channels,
    polarization elements a ``2 x 2`` Jones matrix over (H, V), and the
    polarizing beamsplitter a ``4 x 4`` matrix over
    ``(ch1 H, ch1 V, ch2 H, ch2 V)``.
    """
    kind, p, nch = spec.kind, spec.params, len(spec.channels)
    expected = CHANNEL_KINDS.get(kind)
    if expected is not None and nch != expected:
        raise ElementError(f"{kind} acts on {expected} channel(s), got {nch}")
    if kind in POLARIZATION_KINDS and nch != 1:
        raise ElementError(f"{kind} acts on one channel")

    if kind == "beamsplitter":
        if nch != 2:
            raise ElementError("beamsplitter acts on 2 channels")
        return beamsplitter_matrix(float(p.get("theta", 45.0)), float(p.get("phi", 0.0)))
    if kind == "dielectric":
        t, r = _cplx(p["t"]), _cplx(p["r"])
        if abs(t) ** 2 + abs(r) ** 2 > 1 + 1e-12:
            raise ElementError("dielectric needs |t|^2 + |r|^2 <= 1")
        return np.array([[t, r], [r, t]], dtype=complex)
    if kind == "mmi2":
        return np.array([[1, 1j], [1j, 1]], dtype=complex) / math.sqrt(2)
    if kind == "rewire":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind == "phase_shifter":
        return np.array([[np.exp(1j * math.radians(float(p.get("phi", 0.0))))]])
    if kind == "loss":
        loss = float(p.get("l", 0.0))
        if not 0.0 <= loss <= 1.0:
            raise ElementError("loss must be in [0, 1]")
        return np.array([[math.sqrt(1.0 - loss)]], dtype=complex)
    if kind == "nsx":
        return _nsx_local()
    if kind == "unitary":
        m = _matrix_param(p["matrix"])
        if m.shape != (nch, nch):
            raise ElementError(f"matrix shape {m.shape} does not match {nch} channels")
        return m
    if kind == "random":
        return haar_unitary(nch, p.get("seed"))
    if kind == "rotator":
        return beamsplitter_matrix(float(p.get("theta", 0.0)), float(p.get("phi", 0.0)))
    if kind == "half":
        a = 2 * math.radians(float(p.get("alpha", 0.0)))
        return np.array([[math.cos(a), math.sin(a)], [math.sin(a), -math.cos(a)]], dtype=complex)
    if kind == "quarter":
        a = math.radians(float(p.get("alpha", 0.0)))
        c, s = math.cos(a), math.sin(a)
        off = (1 - 1j) * s * c
        return np.array([[c * c + 1j * s * s, off], [off, s * s + 1j * c * c]], dtype=complex)
    if kind == "polbeamsplitter":
        if nch != 2:
            raise ElementError("polbeamsplitter acts on 2 channels")
        keep = int(p.get("P", 0))
        if keep not in (0, 1):
            raise ElementError("polbeamsplitter P must be 0 (H) or 1 (V)")
        m = np.zeros((4, 4), dtype=complex)
        swap = 1 - keep
        m[keep, keep] = m[2 + keep, 2 + keep] = 1.0
        m[2 + swap, swap] = m[swap, 2 + swap] = 1.0
        return m
    raise ElementError(f"{kind} has no stand-alone local matrix")


def embed(full_dim: int, local_matrix, target_modes: Sequence[int]) -> np.ndarray:
    """Identity of size ``full_dim`` with ``local_matrix`` on ``target_modes``."""
    local = np.asarray(local_matrix, dtype=complex)
    targets = [int(t) for t in target_modes]
    k = len(targets)
    if local.shape != (k, k):
        raise DimensionError(f"local matrix {local.shape} does not match {k} targets")
    if len(set(targets)) != k:
        raise DimensionError(f"duplicate target modes {targets}")
    if any(t < 0 or t >= full_dim for t in targets):
        raise DimensionError(f"target modes {targets} out of range for dimension {full_dim}")
    m = np.eye(full_dim, dtype=complex)
    m[np.ix_(targets, targets)] = local
    return m


def is_unitary(m: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    m = np.asarray(m)
    return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=tol, rtol=0))


class Circuit:
    """Mode map, composed transformation matrix and virtual elements.

    Parameters
    ----------
    nchannels : int
    polarized : bool
        Two polarization sub-modes per channel when True.
    npackets : int
        Packet table capacity per period.
    nperiods : int
        Number of time periods; the packet table is repeated in each.
    period_duration : float
        Time offset between consecutive periods.
    """

    def __init__(
        self,
        nchannels: int,
        polarized: bool = False,
        npackets: int = 1,
        nperiods: int = 1,
        period_duration: float = 1000.0,
    ):
        if nperiods < 1:
            raise DimensionError("nperiods must be positive")
        self.modes = ModeMap(nchannels, 2 if polarized else 1, npackets * nperiods)
        self.packets_per_period = npackets
        self.nperiods = nperiods
        self.period_duration = float(period_duration)
        self.packets: list[PacketSpec] = []
        self.linear = np.eye(self.modes.nmodes, dtype=complex)
        self.emitter: np.ndarray | None = None
        self.elements: list[ElementSpec] = []
        self.detectors: dict[int, DetectorSpec] = {}
        self.ignored: set[int] = set()
        self.noise_stdev2 = 0.0

    # -- basic properties ---------------------------------------------
    @property
    def nchannels(self) -> int:
        return self.modes.nchannels

    @property
    def nmodes(self) -> int:
        return self.modes.nmodes

    @property
    def polarized(self) -> bool:
        return self.modes.npol == 2

    @property
    def U(self) -> np.ndarray:
        """Full circuit matrix, emitter included."""
        if self.emitter is None:
            return self.linear
        return self.linear @ self.emitter

    @property
    def is_lossy(self) -> bool:
        return not is_unitary(self.linear)

    def copy(self) -> "Circuit":
        new = Circuit.__new__(Circuit)
        new.__dict__.update(self.__dict__)
        new.linear = self.linear.copy()
        new.emitter = None if self.emitter is None else self.emitter.copy()
        new.packets = list(self.packets)
        new.elements = list(self.elements)
        new.detectors = {k: DetectorSpec(**vars(v)) for k, v in self.detectors.items()}
        new.ignored = set(self.ignored)
        return new

    # -- packets ------------------------------------------------------
    def add_packet(self, spec: PacketSpec) -> int:
        """Register a packet; returns its packet index (period included).

        Identical parameter tuples share an entry.
        """
        base = spec.base()
        if self.packets and base.shape != self.packets[0].shape:
            raise ElementError("all packets of a circuit must share one shape")
        if spec.period >= self.nperiods:
            raise CapacityError(f"period {spec.period} beyond the {self.nperiods} declared")
        if base in self.packets:
            k = self.packets.index(base)
        else:
            if len(self.packets) >= self.packets_per_period:
                raise CapacityError(
                    f"packet table full ({self.packets_per_period} packets per period)"
                )
            if self.emitter is not None:
                raise ElementError("cannot register packets after the emitter was applied")
            self.packets.append(base)
            k = len(self.packets) - 1
        return spec.period * self.packets_per_period + k

    def apply_emitter(self) -> "Circuit":
        """Compose the Gram-Schmidt emitter as the first circuit operation."""
        if self.emitter is not None:
            raise ElementError("emitter already applied")
        self.emitter = _packets.emitter_matrix(self)
        return self

    # -- elements -----------------------------------------------------
    def element_matrix(self, spec: ElementSpec) -> np.ndarray:
        """Full-mode matrix of ``spec`` on this circuit."""
        modes = self.modes
        for c in spec.channels:
            if not 0 <= c < modes.nchannels:
                raise ElementError(f"{spec.kind}: channel {c} out of range")
        n = modes.nmodes
        if spec.kind == "delay":
            if len(spec.channels) != 1:
                raise ElementError("delay acts on one channel")
            return _packets.delay_matrix(self, spec.channels[0], int(spec.params.get("periods", 1)))
        if spec.kind == "random" and not spec.channels:
            spec = ElementSpec("random", tuple(range(modes.nchannels)), spec.params)
        local = elem_matrix(spec)
        m = np.eye(n, dtype=complex)
        if spec.kind in CHANNEL_KINDS:
            for pol in range(modes.npol):
                for pk in range(modes.npackets):
                    idx = [modes.index(c, pol, pk) for c in spec.channels]
                    m[np.ix_(idx, idx)] = local
        elif spec.kind in POLARIZATION_KINDS or spec.kind == "polbeamsplitter":
            if modes.npol != 2:
                raise ElementError(f"{spec.kind} needs a polarized circuit")
            for pk in range(modes.npackets):
                idx = [modes.index(c, pol, pk) for c in spec.channels for pol in (0, 1)]
                m[np.ix_(idx, idx)] = local
        return m

    def apply_element(self, spec: ElementSpec) -> "Circuit":
        self.linear = self.element_matrix(spec) @ self.linear
        self.elements.append(spec)
        return self

    def add(self, kind: str, channels: Sequence[int], **params) -> "Circuit":
        return self.apply_element(ElementSpec(kind, tuple(channels), params))

    def beamsplitter(self, ch1, ch2, theta=45.0, phi=0.0):
        return self.add("beamsplitter", (ch1, ch2), theta=theta, phi=phi)

    def dielectric(self, ch1, ch2, t, r):
        return self.add("dielectric", (ch1, ch2), t=t, r=r)

    def mmi2(self, ch1, ch2):
        return self.add("mmi2", (ch1, ch2))

    def rewire(self, ch1, ch2):
        return self.add("rewire", (ch1, ch2))

    def phase_shifter(self, ch, phi):
        return self.add("phase_shifter", (ch,), phi=phi)

    def loss(self, ch, l):  # noqa: E741
        return self.add("loss", (ch,), l=l)

    def nsx(self, ch1, ch2, ch3):
        return self.add("nsx", (ch1, ch2, ch3))

    def delay(self, ch, periods=1):
        return self.add("delay", (ch,), periods=periods)

    def rotator(self, ch, theta, phi=0.0):
        return self.add("rotator", (ch,), theta=theta, phi=phi)

    def half(self, ch, alpha):
        return self.add("half", (ch,), alpha=alpha)

    def quarter(self, ch, alpha):
        return self.add("quarter", (ch,), alpha=alpha)

    def polbeamsplitter(self, ch1, ch2, P=0):  # noqa: N803
        return self.add("polbeamsplitter", (ch1, ch2), P=P)

    def random_circuit(self, seed=None):
        return self.add("random", tuple(range(self.nchannels)), seed=seed)

    def unitary(self, channels, matrix):
        return self.add("unitary", tuple(channels), matrix=np.asarray(matrix, dtype=complex))

    # -- detectors ----------------------------------------------------
    def _claim_channel(self, ch: int) -> None:
        if not 0 <= ch < self.nchannels:
            raise ElementError(f"channel {ch} out of range")
        if ch in self.detectors or ch in self.ignored:
            raise ElementError(f"channel {ch} already has a detector")

    def detector(self, ch, cond=None, eff=1.0, blnk=0.0, gamma=0.0, kind="counter"):
        """Add a detector; efficiency below one inserts a loss element."""
        self._claim_channel(ch)
        spec = DetectorSpec(ch, cond, eff, blnk, gamma, kind)
        if eff < 1.0:
            self.loss(ch, 1.0 - eff)
        self.detectors[ch] = spec
        return self

    def add_detector(self, spec: DetectorSpec) -> "Circuit":
        return self.detector(spec.channel, spec.condition, spec.efficiency,
                             spec.dead_fraction, spec.dark_rate, spec.kind)

    def ignore(self, ch) -> "Circuit":
        self._claim_channel(ch)
        self.ignored.add(ch)
        return self

    def noise(self, stdev2: float) -> "Circuit":
        if stdev2 < 0:
            raise ElementError("noise variance must be non-negative")
        self.noise_stdev2 = float(stdev2)
        return self

    @property
    def conditions(self) -> dict[int, int]:
        return {ch: d.condition for ch, d in self.detectors.items() if d.condition is not None}

    # -- composition ---------------------------------------------------
    def add_gate(self, channels: Sequence[int], sub: "Circuit") -> "Circuit":
        """Replay ``sub``'s elements and detectors on the mapped ``channels``."""
        channels = [int(c) for c in channels]
        if len(channels) != sub.nchannels:
            raise DimensionError(
                f"gate has {sub.nchannels} channels, {len(channels)} given"
            )
        if sub.modes.npol != self.modes.npol:
            raise DimensionError("gate and circuit disagree on polarization")
        for spec in sub.elements:
            mapped = tuple(channels[c] for c in spec.channels)
            self.apply_element(ElementSpec(spec.kind, mapped, spec.params))
        for ch, det in sub.detectors.items():
            target = channels[ch]
            self._claim_channel(target)
            self.detectors[target] = DetectorSpec(
                target, det.condition, det.efficiency, det.dead_fraction,
                det.dark_rate, det.kind,
            )
        for ch in sub.ignored:
            self.ignore(channels[ch])
        return self

    def __repr__(self) -> str:
        m = self.modes
        return (f"Circuit(nchannels={m.nchannels}, npol={m.npol}, "
                f"npackets={m.npackets}, elements={len(self.elements)})")


def apply_element(circuit: Circuit, spec: ElementSpec) -> Circuit:
    return circuit.apply_element(spec)


def add_gate(circuit: Circuit, channels: Sequence[int], sub) -> Circuit:
    """Insert a sub-circuit (or a device's circuit) on ``channels``."""
    sub_circuit = sub.circuit() if callable(getattr(sub, "circuit", None)) else sub
    return circuit.add_gate(channels, sub_circuit)
