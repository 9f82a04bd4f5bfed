"""Photon-level device description and simulation drivers.

A :class:`Device` records photons, quantum-dot sources, elements and
detectors in declaration order. The circuit is built on demand: packets
are registered first, the Gram-Schmidt emitter is applied, then the
elements are replayed. Users never handle packet indices directly.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import measurement as _meas
from .circuit import Circuit, DetectorSpec, ElementSpec
from .cores import transform
from .errors import ElementError, ValidationError
from .losses import dilate_circuit, loss_components, pad_state
from .packets import GAUSSIAN, PacketSpec
from .sources import QDParams, sample_qd_pair
from .state import State, _as_qmap

__all__ = [
    "PhotonRecord", "Device", "load_device", "validate_device", "run_state",
    "run", "project_run", "ensemble", "threads",
]


@dataclass(frozen=True)
class PhotonRecord:
    n: int
    channel: int
    pol: int
    packet: PacketSpec

    def to_dict(self) -> dict:
        p = self.packet
        return {"n": self.n, "ch": self.channel, "pol": self.pol, "t": p.t,
                "f": p.f, "w": p.w, "period": p.period}


class Device:
    """Input photons, sources, circuit elements and detectors.

    Parameters
    ----------
    nchannels : int
    polarized : bool
    npackets : int
        Packet table capacity per period.
    nperiods : int
    period_duration : float
    shape : {"gaussian", "exponential"}
        Packet shape shared by every photon of the device.
    """

    def __init__(self, nchannels: int, polarized: bool = False, npackets: int = 1,
                 nperiods: int = 1, period_duration: float = 1000.0, shape: str = GAUSSIAN):
        self.nchannels = int(nchannels)
        self.polarized = bool(polarized)
        self.npackets = int(npackets)
        self.nperiods = int(nperiods)
        self.period_duration = float(period_duration)
        self.shape = PacketSpec(shape).shape
        self.photons: list[PhotonRecord] = []
        self.qd_sources: list[QDParams] = []
        self.open_channels: set[int] = set()
        self.input_state: State | None = None
        self.noise_stdev2 = 0.0
        self._ops: list[tuple] = []
        self._detected: set[int] = set()
        self._table = self._empty_circuit()
        self._built: Circuit | None = None
        self.last_emissions: list = []

    def _empty_circuit(self) -> Circuit:
        return Circuit(self.nchannels, self.polarized, self.npackets,
                       self.nperiods, self.period_duration)

    def _changed(self) -> "Device":
        self._built = None
        return self

    def _check_channel(self, ch: int) -> int:
        ch = int(ch)
        if not 0 <= ch < self.nchannels:
            raise ElementError(f"channel {ch} out of range (0..{self.nchannels - 1})")
        return ch

    # -- photons and sources -------------------------------------------
    def packet(self, t: float = 0.0, f: float = 1.0, w: float = 1.0, period: int = 0) -> PacketSpec:
        return PacketSpec(self.shape, t, f, w, period)

    def add_photons(self, n: int, ch: int, pol: int = 0, t: float = 0.0, f: float = 1.0,
                    w: float = 1.0, period: int = 0) -> "Device":
        """Put ``n`` photons with the given packet into channel ``ch``.

        The packet is registered even when ``n`` is zero.
        """
        if n < 0:
            raise ValueError("photon number must be non-negative")
        ch = self._check_channel(ch)
        if pol not in (0, 1) or (pol == 1 and not self.polarized):
            raise ElementError(f"invalid polarization {pol}")
        spec = self.packet(t, f, w, period)
        self._table.add_packet(spec)
        self.photons.append(PhotonRecord(int(n), ch, int(pol), spec))
        return self._changed()

    def add_qd(self, ch_xx: int, ch_x: int, **params) -> "Device":
        """Attach a quantum-dot pair source (see :class:`QDParams`)."""
        if not self.polarized:
            raise ElementError("quantum-dot sources need a polarized device")
        qd = QDParams(ch_xx=self._check_channel(ch_xx), ch_x=self._check_channel(ch_x),
                      shape=self.shape, **params)
        self._table.add_packet(qd.xx_packet)
        self._table.add_packet(qd.x_packet)
        self.qd_sources.append(qd)
        return self._changed()

    def open_channel(self, ch: int) -> "Device":
        """Mark a port left free for composition into a larger device."""
        self.open_channels.add(self._check_channel(ch))
        return self

    def qubits(self, values: Sequence[int], qmap) -> "Device":
        """Add one photon per qubit: logical 1 in the first channel of its pair."""
        qmap = _as_qmap(qmap)
        qmap.check(self.nchannels)
        if len(values) != qmap.nqubits:
            raise ValueError(f"{qmap.nqubits} qubit values expected, got {len(values)}")
        for b, (c0, c1) in zip(values, qmap.pairs):
            if b not in (0, 1):
                raise ValueError(f"qubit value {b} is not 0 or 1")
            self.add_photons(1, c0 if b == 1 else c1)
        return self

    def set_input(self, state: State) -> "Device":
        """Use an explicit input state instead of the declared photons."""
        if state.nmodes != self._table.nmodes:
            raise ValueError(f"input state needs {self._table.nmodes} modes")
        self.input_state = state
        return self._changed()

    def separator(self) -> "Device":
        """Display marker; no effect on the simulation."""
        self._ops.append(("separator",))
        return self

    # -- elements and detectors ----------------------------------------
    def add(self, kind: str, channels: Sequence[int], **params) -> "Device":
        spec = ElementSpec(kind, tuple(self._check_channel(c) for c in channels), params)
        self._ops.append(("element", spec))
        return self._changed()

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
        return self.add("unitary", channels, matrix=np.asarray(matrix, dtype=complex))

    def _claim(self, ch: int) -> int:
        ch = self._check_channel(ch)
        if ch in self._detected:
            raise ElementError(f"channel {ch} already has a detector")
        self._detected.add(ch)
        return ch

    def detector(self, ch, cond=None, eff=1.0, blnk=0.0, gamma=0.0, kind="counter") -> "Device":
        spec = DetectorSpec(self._claim(ch), cond, eff, blnk, gamma, kind)
        self._ops.append(("detector", spec))
        return self._changed()

    def ignore(self, ch) -> "Device":
        self._ops.append(("ignore", self._claim(ch)))
        return self._changed()

    def noise(self, stdev2: float) -> "Device":
        if stdev2 < 0:
            raise ElementError("noise variance must be non-negative")
        self.noise_stdev2 = float(stdev2)
        return self._changed()

    def add_gate(self, channels: Sequence[int], sub: "Device | Circuit", text: str = "") -> "Device":
        """Insert a sub-device on ``channels``.

        The sub-device's photons on non-open channels, its elements and its
        detectors are imported with channels renumbered.
        """
        channels = [self._check_channel(c) for c in channels]
        if isinstance(sub, Circuit):
            if len(channels) != sub.nchannels:
                raise ElementError(f"gate has {sub.nchannels} channels, {len(channels)} given")
            for spec in sub.elements:
                self.add(spec.kind, [channels[c] for c in spec.channels], **spec.params)
            for ch, det in sub.detectors.items():
                self.detector(channels[ch], det.condition, det.efficiency,
                              det.dead_fraction, det.dark_rate, det.kind)
            return self
        if len(channels) != sub.nchannels:
            raise ElementError(f"gate has {sub.nchannels} channels, {len(channels)} given")
        if sub.polarized != self.polarized:
            raise ElementError("gate and device disagree on polarization")
        for ph in sub.photons:
            if ph.channel not in sub.open_channels:
                self.add_photons(ph.n, channels[ph.channel], ph.pol, ph.packet.t,
                                 ph.packet.f, ph.packet.w, ph.packet.period)
        for op in sub._ops:
            kind = op[0]
            if kind == "element":
                spec = op[1]
                self.add(spec.kind, [channels[c] for c in spec.channels], **spec.params)
            elif kind == "detector":
                d = op[1]
                self.detector(channels[d.channel], d.condition, d.efficiency,
                              d.dead_fraction, d.dark_rate, d.kind)
            elif kind == "ignore":
                self.ignore(channels[op[1]])
        self._ops.append(("separator", text))
        return self

    # -- building ------------------------------------------------------
    def circuit(self) -> Circuit:
        """Finalized circuit: emitter first, then the elements in order."""
        if self._built is not None:
            return self._built
        circ = self._empty_circuit()
        for spec in self._table.packets:
            circ.add_packet(spec)
        if circ.packets:
            circ.apply_emitter()
        for op in self._ops:
            if op[0] == "element":
                circ.apply_element(op[1])
            elif op[0] == "detector":
                circ.add_detector(op[1])
            elif op[0] == "ignore":
                circ.ignore(op[1])
        circ.noise(self.noise_stdev2)
        self._built = circ
        return circ

    def _photon_ket(self) -> list[int]:
        ket = [0] * self._table.nmodes
        for ph in self.photons:
            k = self._table.add_packet(ph.packet)
            ket[self._table.modes.index(ph.channel, ph.pol, k)] += ph.n
        return ket

    def input(self, rng=None) -> State:
        """Input state; quantum-dot sources are sampled with ``rng``."""
        if self.input_state is not None and not self.qd_sources:
            return self.input_state.copy()
        modes = self._table.modes
        if self.input_state is not None:
            base = self.input_state
        else:
            base = State.basis(self._photon_ket())
        if not self.qd_sources:
            return base
        rng = np.random.default_rng(rng)
        self.last_emissions = []
        state = base
        for qd in self.qd_sources:
            em = sample_qd_pair(qd, rng)
            self.last_emissions.append(em)
            kxx = self._table.add_packet(qd.xx_packet)
            kx = self._table.add_packet(qd.x_packet)
            nxt = State(state.nmodes)
            for ket, amp in state.items():
                for (pa, pb), c in em.pairs.items():
                    new = list(ket)
                    new[modes.index(qd.ch_xx, pa, kxx)] += 1
                    new[modes.index(qd.ch_x, pb, kx)] += 1
                    nxt.add_term(amp * c, new)
            state = nxt
        return state

    def apply_condition(self, state: State) -> State:
        return _meas.apply_condition(state, self.circuit())

    @property
    def nmodes(self) -> int:
        return self._table.nmodes

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "channels": self.nchannels, "polarized": self.polarized,
            "npackets": self.npackets, "nperiods": self.nperiods,
            "period_duration": self.period_duration, "shape": self.shape,
            "packets": [{"t": p.t, "f": p.f, "w": p.w} for p in self._table.packets],
            "photons": [ph.to_dict() for ph in self.photons],
            "qd": [{k: v for k, v in q.to_dict().items() if k not in ("shape",)}
                   for q in self.qd_sources],
            "elements": [op[1].to_dict() for op in self._ops if op[0] == "element"],
            "detectors": [op[1].to_dict() for op in self._ops if op[0] == "detector"],
            "ignore": [op[1] for op in self._ops if op[0] == "ignore"],
            "noise": self.noise_stdev2,
        }
        if self.input_state is not None:
            d["input"] = self.input_state.to_records()
        return d

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: dict) -> "Device":
        validate_device(d)
        dev = cls(d["channels"], d.get("polarized", False), d.get("npackets", 1),
                  d.get("nperiods", 1), d.get("period_duration", 1000.0),
                  d.get("shape", GAUSSIAN))
        for p in d.get("packets", []):
            dev._table.add_packet(dev.packet(p.get("t", 0.0), p.get("f", 1.0),
                                             p.get("w", p.get("tau", 1.0)), p.get("period", 0)))
        for ph in d.get("photons", []):
            dev.add_photons(ph.get("n", 1), ph["ch"], ph.get("pol", 0), ph.get("t", 0.0),
                            ph.get("f", 1.0), ph.get("w", ph.get("tau", 1.0)), ph.get("period", 0))
        for q in d.get("qd", []):
            q = dict(q)
            ch_xx, ch_x = q.pop("ch_xx"), q.pop("ch_x")
            q.pop("shape", None)
            dev.add_qd(ch_xx, ch_x, **q)
        if "qubits" in d:
            dev.qubits(d["qubits"]["values"], d["qubits"]["qmap"])
        if "input" in d:
            dev.set_input(State.from_records(d["input"], dev.nmodes))
        for e in d.get("elements", []):
            spec = ElementSpec.from_dict(e)
            dev.add(spec.kind, spec.channels, **spec.params)
        for det in d.get("detectors", []):
            s = DetectorSpec.from_dict(det)
            dev.detector(s.channel, s.condition, s.efficiency, s.dead_fraction,
                         s.dark_rate, s.kind)
        for ch in d.get("ignore", []):
            dev.ignore(ch)
        dev.noise(d.get("noise", 0.0))
        return dev

    @classmethod
    def from_json(cls, text: str) -> "Device":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(
                f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
        return cls.from_dict(d)

    def __repr__(self) -> str:
        nph = sum(p.n for p in self.photons)
        return (f"Device(nchannels={self.nchannels}, polarized={self.polarized}, "
                f"photons={nph}, qd={len(self.qd_sources)}, ops={len(self._ops)})")


_TOP_KEYS = {
    "channels", "polarized", "npackets", "nperiods", "period_duration", "shape",
    "packets", "photons", "qd", "qubits", "input", "elements", "detectors",
    "ignore", "noise",
}


def validate_device(d) -> None:
    """Check the structure of a device description.

    Raises
    ------
    ValidationError
        Naming the offending entry, e.g. ``elements[2].ch``.
    """
    def need(cond, where, msg):
        if not cond:
            raise ValidationError(f"{where}: {msg}")

    need(isinstance(d, dict), "device", "top level must be an object")
    unknown = set(d) - _TOP_KEYS
    need(not unknown, "device", f"unknown keys {sorted(unknown)}")
    need(isinstance(d.get("channels"), int) and d["channels"] > 0,
         "channels", "positive integer required")
    nch = d["channels"]
    for key in ("npackets", "nperiods"):
        if key in d:
            need(isinstance(d[key], int) and d[key] > 0, key, "positive integer required")
    for i, ph in enumerate(d.get("photons", [])):
        where = f"photons[{i}]"
        need(isinstance(ph, dict) and "ch" in ph, where, "needs a 'ch' entry")
        need(isinstance(ph["ch"], int) and 0 <= ph["ch"] < nch, f"{where}.ch", "channel out of range")
        need(int(ph.get("n", 1)) >= 0, f"{where}.n", "must be non-negative")
    for i, e in enumerate(d.get("elements", [])):
        where = f"elements[{i}]"
        need(isinstance(e, dict) and "kind" in e, where, "needs a 'kind' entry")
        chans = e.get("ch", e.get("channels", []))
        need(isinstance(chans, list), f"{where}.ch", "must be a list")
        for c in chans:
            need(isinstance(c, int) and 0 <= c < nch, f"{where}.ch", f"channel {c} out of range")
    seen = set()
    for i, det in enumerate(d.get("detectors", [])):
        where = f"detectors[{i}]"
        need(isinstance(det, dict) and "ch" in det, where, "needs a 'ch' entry")
        ch = det["ch"]
        need(isinstance(ch, int) and 0 <= ch < nch, f"{where}.ch", "channel out of range")
        need(ch not in seen, f"{where}.ch", f"second detector on channel {ch}")
        seen.add(ch)
        cond = det.get("cond")
        need(cond is None or (isinstance(cond, int) and cond >= 0), f"{where}.cond",
             "must be a non-negative integer or null")
    for i, rec in enumerate(d.get("input", [])):
        need(isinstance(rec, dict) and "ket" in rec, f"input[{i}]", "needs a 'ket' entry")
    if "qubits" in d:
        q = d["qubits"]
        need(isinstance(q, dict) and "values" in q and "qmap" in q, "qubits",
             "needs 'values' and 'qmap'")
    for i, q in enumerate(d.get("qd", [])):
        need(isinstance(q, dict) and "ch_xx" in q and "ch_x" in q, f"qd[{i}]",
             "needs 'ch_xx' and 'ch_x'")
    need(float(d.get("noise", 0.0)) >= 0, "noise", "variance must be non-negative")


def load_device(path: str | os.PathLike) -> Device:
    with open(path) as fh:
        return Device.from_json(fh.read())


# ---------------------------------------------------------------------------
# simulation drivers


def threads() -> int:
    """Worker cap from ``FOCKFORGE_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("FOCKFORGE_THREADS", "1")))
    except ValueError:
        return 1


def run_state(device: Device, core: str = "glynn", basis=None, rng=None,
              losses: bool = True, input_state: State | None = None,
              cache: dict | None = None):
    """Raw output state of one run.

    For lossy circuits (and ``losses=True``) the state lives on the doubled
    mode space with loss modes appended; otherwise on the physical modes.
    ``cache`` is handed to :func:`transform` for repeated runs.

    Returns
    -------
    (State, Circuit)
    """
    circ = device.circuit()
    st = device.input(rng) if input_state is None else input_state
    if losses and circ.is_lossy:
        dil = dilate_circuit(circ)
        return transform(pad_state(st), dil.U2n, core, basis, cache), circ
    return transform(st, circ.U, core, basis, cache), circ


def run(device: Device, core: str = "glynn", basis=None, seed=None,
        runs: int = 100_000, losses: bool = True) -> _meas.ProbabilityBins:
    """Outcome probabilities after the detection pipeline."""
    rng = np.random.default_rng(seed)
    raw, circ = run_state(device, core, basis, rng, losses)
    return _meas.detection_pipeline(raw, circ, rng, runs)


def project_run(raw: State, circ: Circuit, projectors=None) -> list[State]:
    """Post-selected reduced states of one run, one per (loss pattern, projector)."""
    n = circ.nmodes
    if raw.nmodes == 2 * n:
        parts = list(loss_components(raw, n).values())
    else:
        parts = [raw]
    out = []
    for part in parts:
        out += [st for _, st in _meas.project(part, circ, projectors)]
    return out


def _ensemble_chunk(device, seeds, core, basis, losses, projectors):
    dm = _meas.DensityMatrix(polarized=device.polarized)
    cache: dict = {}
    for s in seeds:
        rng = np.random.default_rng(s)
        raw, circ = run_state(device, core, basis, rng, losses, cache=cache)
        states = project_run(raw, circ, projectors)
        if dm.mode_labels is None and states:
            dm.mode_labels = states[0].labels
        dm.add_states(states)
    return dm


def ensemble(device: Device, nruns: int, seed=None, core: str = "glynn", basis=None,
             losses: bool = True, projectors=None, workers: int | None = None):
    """Accumulate the post-selected density matrix over ``nruns`` runs.

    Each run draws its own source realization from a seed spawned off
    ``seed``; the result only depends on ``seed`` and ``nruns``.
    """
    if nruns <= 0:
        raise ValueError("nruns must be positive")
    device.circuit()
    seeds = np.random.SeedSequence(seed).spawn(nruns)
    workers = threads() if workers is None else max(1, workers)
    nchunks = min(workers, nruns)
    chunks = [seeds[i::nchunks] for i in range(nchunks)]
    if nchunks == 1:
        parts = [_ensemble_chunk(device, chunks[0], core, basis, losses, projectors)]
    else:
        # quantum-dot draws mutate device.last_emissions; give each worker a copy
        import copy

        with ThreadPoolExecutor(nchunks) as pool:
            futs = [pool.submit(_ensemble_chunk, copy.deepcopy(device), c, core, basis,
                                losses, projectors) for c in chunks]
            parts = [f.result() for f in futs]
    dm = parts[0]
    for p in parts[1:]:
        dm = dm.merge(p)
    return dm
