"""Sparse Fock-state superpositions and qubit path encoding.

A :class:`State` maps occupation vectors (tuples of photon numbers, one per
mode) to complex amplitudes. Adding a ket that is already present sums the
amplitudes, so the dictionary doubles as the de-duplication index.
States are deliberately not renormalized by the simulator: after
post-selection the squared norm is the success probability.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DimensionError, EncodingError, NormalizationError

PRUNE_TOL = 1e-14
MAX_OCCUPATION = 15

Ket = tuple


def _as_ket(ket, nmodes: int, max_occupation: int) -> Ket:
    ket = tuple(int(n) for n in ket)
    if len(ket) != nmodes:
        raise DimensionError(f"ket {ket} has {len(ket)} modes, state has {nmodes}")
    for n in ket:
        if n < 0:
            raise DimensionError(f"negative occupation in ket {ket}")
        if n > max_occupation:
            raise DimensionError(
                f"occupation {n} exceeds the per-mode cap {max_occupation}"
            )
    return ket


class State:
    """Sparse superposition of Fock kets over ``nmodes`` modes.

    Parameters
    ----------
    nmodes : int
        Number of modes of every ket.
    terms : iterable of (amplitude, ket), optional
        Initial terms, added in order with duplicate summing.
    labels : sequence, optional
        One label per mode, usually ``(channel, polarization, packet)``.
        Set by operations that remove modes so the survivors stay
        identifiable.
    max_occupation : int
        Largest photon number allowed in a single mode.
    """

    __slots__ = ("nmodes", "labels", "max_occupation", "_terms")

    def __init__(
        self,
        nmodes: int,
        terms: Iterable[tuple[complex, Sequence[int]]] | None = None,
        labels: Sequence | None = None,
        max_occupation: int = MAX_OCCUPATION,
    ):
        if nmodes < 0:
            raise DimensionError("nmodes must be non-negative")
        self.nmodes = int(nmodes)
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != self.nmodes:
                raise DimensionError("one label per mode is required")
        self.labels = labels
        self.max_occupation = max_occupation
        self._terms: dict[Ket, complex] = {}
        if terms is not None:
            for amp, ket in terms:
                self.add_term(amp, ket)

    # -- construction ---------------------------------------------------
    def add_term(self, amplitude: complex, ket: Sequence[int]) -> "State":
        """Add ``amplitude * |ket>``; an existing ket has its amplitude summed."""
        ket = _as_ket(ket, self.nmodes, self.max_occupation)
        self._terms[ket] = self._terms.get(ket, 0j) + complex(amplitude)
        return self

    def _add_unchecked(self, amplitude: complex, ket: Ket) -> None:
        terms = self._terms
        terms[ket] = terms.get(ket, 0j) + amplitude

    @classmethod
    def basis(cls, ket: Sequence[int], amplitude: complex = 1.0, **kw) -> "State":
        return cls(len(ket), [(amplitude, ket)], **kw)

    def copy(self) -> "State":
        out = State(self.nmodes, labels=self.labels, max_occupation=self.max_occupation)
        out._terms = dict(self._terms)
        return out

    def _empty_like(self) -> "State":
        return State(self.nmodes, labels=self.labels, max_occupation=self.max_occupation)

    # -- access ---------------------------------------------------------
    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[complex, Ket]]:
        for ket, amp in self._terms.items():
            yield amp, ket

    def __contains__(self, ket) -> bool:
        return tuple(ket) in self._terms

    def items(self):
        """``(ket, amplitude)`` pairs in insertion order."""
        return self._terms.items()

    def kets(self) -> list[Ket]:
        return list(self._terms)

    def amplitude(self, ket: Sequence[int]) -> complex:
        return self._terms.get(tuple(ket), 0j)

    def sorted_terms(self, reverse: bool = False) -> list[tuple[Ket, complex]]:
        """Terms ordered lexicographically on the occupation vector."""
        return sorted(self._terms.items(), key=lambda kv: kv[0], reverse=reverse)

    def photon_numbers(self) -> set[int]:
        return {sum(k) for k in self._terms}

    # -- arithmetic -----------------------------------------------------
    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self._terms.values()))

    def prune(self, tol: float = PRUNE_TOL) -> "State":
        """Copy without terms whose amplitude modulus is below ``tol``."""
        out = self._empty_like()
        out._terms = {k: a for k, a in self._terms.items() if abs(a) >= tol}
        return out

    def normalize(self) -> "State":
        """Copy rescaled to unit norm."""
        n2 = self.norm2()
        if n2 <= 0.0:
            raise NormalizationError("cannot normalize a zero state")
        scale = 1.0 / np.sqrt(n2)
        out = self._empty_like()
        out._terms = {k: a * scale for k, a in self._terms.items()}
        return out

    def _check_compatible(self, other: "State") -> None:
        if not isinstance(other, State):
            raise TypeError(f"expected State, got {type(other).__name__}")
        if other.nmodes != self.nmodes:
            raise DimensionError(
                f"states have {self.nmodes} and {other.nmodes} modes"
            )

    def __add__(self, other: "State") -> "State":
        self._check_compatible(other)
        out = self.copy()
        for ket, amp in other._terms.items():
            out._add_unchecked(amp, ket)
        return out

    def __sub__(self, other: "State") -> "State":
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> "State":
        out = self._empty_like()
        out._terms = {k: a * scalar for k, a in self._terms.items()}
        return out

    __rmul__ = __mul__

    def __neg__(self) -> "State":
        return self * -1.0

    def braket(self, other: "State") -> complex:
        """Inner product ``<self|other>``."""
        return braket(self, other)

    def isclose(self, other: "State", atol: float = 1e-10) -> bool:
        """Term-by-term comparison up to ``atol``, ignoring near-zero terms."""
        self._check_compatible(other)
        for ket in set(self._terms) | set(other._terms):
            if abs(self.amplitude(ket) - other.amplitude(ket)) > atol:
                return False
        return True

    def __eq__(self, other) -> bool:
        if not isinstance(other, State) or other.nmodes != self.nmodes:
            return NotImplemented
        a = self.prune()._terms
        b = other.prune()._terms
        return a == b

    __hash__ = None

    # -- display / serialization ---------------------------------------
    def format(self, precision: int = 8, reverse: bool = False) -> str:
        lines = []
        for ket, amp in self.sorted_terms(reverse=reverse):
            sign = "-" if amp.imag < 0 else "+"
            body = ", ".join(str(n) for n in ket)
            lines.append(
                f"| {body} >: {amp.real: .{precision}f} {sign} "
                f"{abs(amp.imag):.{precision}f} j"
            )
        return "\n".join(lines)

    def __str__(self) -> str:
        return self.format()

    def __repr__(self) -> str:
        return f"State(nmodes={self.nmodes}, nterms={len(self)})"

    def to_records(self, precision: int | None = None) -> list[dict]:
        """JSON-ready list of ``{"ket", "re", "im"}``, lexicographically ordered."""
        recs = []
        for ket, amp in self.sorted_terms():
            re, im = amp.real, amp.imag
            if precision is not None:
                re, im = round(re, precision), round(im, precision)
            recs.append({"ket": list(ket), "re": re, "im": im})
        return recs

    def to_json(self, precision: int | None = None) -> str:
        return json.dumps(self.to_records(precision))

    @classmethod
    def from_records(cls, records: Sequence[dict], nmodes: int | None = None) -> "State":
        if nmodes is None:
            if not records:
                raise DimensionError("cannot infer nmodes from an empty record list")
            nmodes = len(records[0]["ket"])
        st = cls(nmodes)
        for rec in records:
            st.add_term(complex(rec.get("re", 0.0), rec.get("im", 0.0)), rec["ket"])
        return st

    @classmethod
    def from_json(cls, text: str, nmodes: int | None = None) -> "State":
        return cls.from_records(json.loads(text), nmodes)


def braket(a: State, b: State) -> complex:
    """``<a|b>`` summed over shared kets."""
    a._check_compatible(b)
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for ket, amp in small._terms.items():
        other = large._terms.get(ket)
        if other is not None:
            total += amp.conjugate() * other if small is a else other.conjugate() * amp
    return total


def add_term(state: State, amplitude: complex, ket: Sequence[int]) -> State:
    return state.add_term(amplitude, ket)


def normalize(state: State) -> State:
    return state.normalize()


# ---------------------------------------------------------------------------
# qubit path encoding


@dataclass(frozen=True)
class QubitMap:
    """Path encoding: qubit ``q`` lives on channels ``pairs[q] = (c0, c1)``.

    A photon in ``c0`` (configuration "10") is logical 1 and a photon in
    ``c1`` ("01") is logical 0.
    """

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        flat = [c for p in pairs for c in p]
        if len(set(flat)) != len(flat):
            raise EncodingError(f"qubit channels must be distinct: {flat}")
        if any(c < 0 for c in flat):
            raise EncodingError("qubit channels must be non-negative")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "QubitMap":
        """Build from the two-row layout ``[[c0 of each qubit], [c1 of each qubit]]``."""
        if len(rows) != 2 or len(rows[0]) != len(rows[1]):
            raise EncodingError("qubit map rows must be two equal-length lists")
        return cls(tuple(zip(rows[0], rows[1])))

    @property
    def nqubits(self) -> int:
        return len(self.pairs)

    @property
    def channels(self) -> set[int]:
        return {c for p in self.pairs for c in p}

    def check(self, nchannels: int) -> None:
        for c in self.channels:
            if c >= nchannels:
                raise EncodingError(f"qubit channel {c} not in circuit ({nchannels} channels)")


def _as_qmap(qmap) -> QubitMap:
    if isinstance(qmap, QubitMap):
        return qmap
    return QubitMap.from_rows(qmap)


def _position_channels(state: State, modes) -> list[int]:
    if state.labels is not None:
        return [lab[0] for lab in state.labels]
    if modes is None:
        return list(range(state.nmodes))
    if modes.nmodes != state.nmodes:
        raise DimensionError("state does not live on the circuit's modes")
    return [modes.label(i)[0] for i in range(state.nmodes)]


def encode_qubits(state: State, qmap, circuit=None, strict: bool = True) -> State:
    """Rewrite photonic kets as logical qubit kets.

    Parameters
    ----------
    state : State
        Photonic state. Positions are resolved to channels through
        ``state.labels`` when present, otherwise through ``circuit.modes``.
    qmap : QubitMap or two-row list
    circuit : Circuit, optional
    strict : bool
        Raise :class:`EncodingError` on kets without exactly one photon per
        qubit pair. When False such kets are dropped.
    """
    qmap = _as_qmap(qmap)
    modes = getattr(circuit, "modes", None)
    chans = _position_channels(state, modes)
    where: dict[int, int] = {}
    for pos, ch in enumerate(chans):
        if ch in qmap.channels:
            if ch in where:
                raise EncodingError(
                    f"channel {ch} spans several modes; encode after detector relabeling"
                )
            where[ch] = pos
    missing = qmap.channels - set(where)
    if missing:
        raise EncodingError(f"qubit channels {sorted(missing)} absent from state")

    out = State(qmap.nqubits)
    for ket, amp in state.items():
        bits = []
        for c0, c1 in qmap.pairs:
            pair = (ket[where[c0]], ket[where[c1]])
            if pair == (1, 0):
                bits.append(1)
            elif pair == (0, 1):
                bits.append(0)
            else:
                if strict:
                    raise EncodingError(f"ket {ket} is not a valid qubit configuration")
                bits = None
                break
        if bits is not None:
            out._add_unchecked(amp, tuple(bits))
    return out


def decode_qubits(qubit_state: State, qmap, ancilla=None, circuit=None) -> State:
    """Inverse of :func:`encode_qubits`.

    ``ancilla`` lists the occupations of the channels not used by any qubit,
    in increasing channel order; it defaults to all zeros.
    """
    qmap = _as_qmap(qmap)
    if qubit_state.nmodes != qmap.nqubits:
        raise DimensionError(
            f"qubit state has {qubit_state.nmodes} entries for {qmap.nqubits} qubits"
        )
    modes = getattr(circuit, "modes", None)
    nch = modes.nchannels if modes is not None else 2 * qmap.nqubits + len(ancilla or [])
    qmap.check(nch)
    others = [c for c in range(nch) if c not in qmap.channels]
    if ancilla is None:
        ancilla = [0] * len(others)
    if len(ancilla) != len(others):
        raise EncodingError(
            f"{len(others)} ancilla occupations expected, got {len(ancilla)}"
        )
    nmodes = modes.nmodes if modes is not None else nch
    out = State(nmodes)
    for bits, amp in ((k, a) for k, a in qubit_state.items()):
        occ = [0] * nch
        for (c0, c1), b in zip(qmap.pairs, bits):
            if b not in (0, 1):
                raise EncodingError(f"non-binary qubit value {b} in {bits}")
            occ[c0], occ[c1] = (1, 0) if b == 1 else (0, 1)
        for c, n in zip(others, ancilla):
            occ[c] = int(n)
        if modes is not None:
            ket = [0] * nmodes
            for c, n in enumerate(occ):
                ket[modes.index(c, 0, 0)] = n
        else:
            ket = occ
        out.add_term(amp, ket)
    return out
