"""Detection: post-selection, outcome bins, density matrices and detector errors.

The detection pipeline runs in a fixed order:

1. probability distribution of the raw output,
2. dark counts,
3. dead time,
4. post-selection (loss modes are summed out here as well),
5. removal of degrees of freedom the detectors cannot resolve,
6. Gaussian noise.

Dark counts and dead time are per-run random events; they are applied to
outcomes sampled from the distribution and rebinned.
"""

from __future__ import annotations

import itertools
import math
from typing import NamedTuple, Sequence

import numpy as np

from .circuit import Circuit, DetectorSpec
from .errors import DimensionError, FockForgeError
from .state import State

__all__ = [
    "DetectorSpec", "OutcomeLabel", "ProbabilityBins", "DensityMatrix",
    "conditioned_modes", "enumerate_projectors", "project", "apply_condition",
    "mode_bins", "bins_from_state", "post_select", "relabel", "dark_counts",
    "dead_time", "add_noise", "detection_pipeline", "translate",
]


class OutcomeLabel(NamedTuple):
    """What one entry of an outcome vector counts.

    ``kind`` is ``"full"`` (``index`` is the packet), ``"timed"`` (``index``
    is the period), ``"counter"`` (``index`` is None) or ``"loss"`` for a
    virtual loss mode.
    """

    channel: int
    pol: int
    index: int | None
    kind: str = "full"

    def text(self, polarized: bool) -> str:
        pol = "HV"[self.pol] if polarized else ""
        if self.kind == "counter":
            return f"{pol}{self.channel}" if polarized else f"{self.channel}"
        tag = "L" if self.kind == "loss" else ""
        return f"{tag}{pol}({self.index}){self.channel}"


def _mode_labels(circuit: Circuit, with_loss: bool = False) -> list[OutcomeLabel]:
    labs = [OutcomeLabel(c, p, k, "full") for c, p, k in circuit.modes.labels()]
    if with_loss:
        labs += [OutcomeLabel(c, p, k, "loss") for c, p, k in circuit.modes.labels()]
    return labs


class ProbabilityBins:
    """Outcome -> probability accumulator.

    Parameters
    ----------
    labels : sequence of OutcomeLabel
        Meaning of each entry of the outcome vectors.
    bins : dict, optional
    polarized : bool
        Only affects display.
    """

    def __init__(self, labels: Sequence[OutcomeLabel], bins: dict | None = None,
                 polarized: bool = False):
        self.labels = tuple(labels)
        self.bins: dict[tuple, float] = dict(bins or {})
        self.polarized = polarized

    def add(self, outcome, p: float) -> None:
        outcome = tuple(int(x) for x in outcome)
        if len(outcome) != len(self.labels):
            raise DimensionError(f"outcome {outcome} does not match {len(self.labels)} labels")
        self.bins[outcome] = self.bins.get(outcome, 0.0) + float(p)

    @property
    def total(self) -> float:
        return float(sum(self.bins.values()))

    def __len__(self) -> int:
        return len(self.bins)

    def __getitem__(self, outcome) -> float:
        return self.bins.get(tuple(outcome), 0.0)

    def prob(self, outcome) -> float:
        return self[outcome]

    def items(self):
        return self.bins.items()

    def copy(self) -> "ProbabilityBins":
        return ProbabilityBins(self.labels, self.bins, self.polarized)

    def merge(self, other: "ProbabilityBins") -> "ProbabilityBins":
        if other.labels != self.labels:
            raise DimensionError("cannot merge bins with different labels")
        out = self.copy()
        for k, p in other.bins.items():
            out.bins[k] = out.bins.get(k, 0.0) + p
        return out

    def sorted_items(self) -> list[tuple[tuple, float]]:
        return sorted(self.bins.items(), key=lambda kv: kv[0], reverse=True)

    def channel_positions(self, channel: int) -> list[int]:
        return [i for i, lab in enumerate(self.labels)
                if lab.channel == channel and lab.kind != "loss"]

    def header(self) -> list[str]:
        return [lab.text(self.polarized) for lab in self.labels]

    def to_csv(self, precision: int = 9) -> str:
        lines = ["ket,probability"]
        for k, p in self.sorted_items():
            lines.append(f"\"{' '.join(map(str, k))}\",{p:.{precision}f}")
        return "\n".join(lines)

    def to_records(self, precision: int = 9) -> list[dict]:
        return [{"ket": list(k), "p": round(p, precision)} for k, p in self.sorted_items()]

    def __str__(self) -> str:
        head = " ".join(self.header())
        lines = [f"[{head}]"]
        for k, p in self.sorted_items():
            lines.append(f"| {', '.join(map(str, k))} >: {p:.8f}")
        return "\n".join(lines)

    def __repr__(self) -> str:
        return f"ProbabilityBins(noutcomes={len(self)}, total={self.total:.6f})"


class DensityMatrix:
    """Density matrix grown on demand from pure states.

    Rows and columns are created the first time a ket shows up. ``runs``
    counts accumulated simulations; read-out divides either by the trace
    or by the run count.
    """

    def __init__(self, mode_labels: Sequence | None = None, polarized: bool = False):
        self.mode_labels = None if mode_labels is None else tuple(mode_labels)
        self.polarized = polarized
        self.kets: list[tuple] = []
        self._index: dict[tuple, int] = {}
        self._rho = np.zeros((0, 0), dtype=complex)
        self.runs = 0

    def __len__(self) -> int:
        return len(self.kets)

    def _grow(self, new: int) -> None:
        n = len(self.kets)
        cap = self._rho.shape[0]
        if n + new <= cap:
            return
        size = max(2 * cap, n + new, 4)
        rho = np.zeros((size, size), dtype=complex)
        rho[:n, :n] = self._rho[:n, :n]
        self._rho = rho

    def _check_modes(self, state: State) -> None:
        if self.mode_labels is None:
            self.mode_labels = state.labels
            return
        if state.labels is not None and tuple(state.labels) != self.mode_labels:
            raise DimensionError("state modes differ from the density matrix modes")

    def add_state(self, state: State, count_run: bool = True) -> "DensityMatrix":
        """Accumulate ``|psi><psi|`` (the state is used as is, unnormalized)."""
        self._check_modes(state)
        if count_run:
            self.runs += 1
        terms = [(k, a) for k, a in state.items() if a != 0]
        if not terms:
            return self
        fresh = [k for k, _ in terms if k not in self._index]
        self._grow(len(fresh))
        for k in fresh:
            self._index[k] = len(self.kets)
            self.kets.append(k)
        idx = np.array([self._index[k] for k, _ in terms])
        amp = np.array([a for _, a in terms], dtype=complex)
        self._rho[np.ix_(idx, idx)] += np.outer(amp, amp.conj())
        return self

    def add_states(self, states) -> "DensityMatrix":
        """Accumulate several orthogonal branches of a single run."""
        self.runs += 1
        for st in states:
            self.add_state(st, count_run=False)
        return self

    def merge(self, other: "DensityMatrix") -> "DensityMatrix":
        if (self.mode_labels is not None and other.mode_labels is not None
                and self.mode_labels != other.mode_labels):
            raise DimensionError("cannot merge density matrices over different modes")
        out = DensityMatrix(self.mode_labels or other.mode_labels, self.polarized)
        for dm in (self, other):
            out.runs += dm.runs
            n = len(dm.kets)
            fresh = [k for k in dm.kets if k not in out._index]
            out._grow(len(fresh))
            for k in fresh:
                out._index[k] = len(out.kets)
                out.kets.append(k)
            idx = np.array([out._index[k] for k in dm.kets], dtype=int)
            if n:
                out._rho[np.ix_(idx, idx)] += dm._rho[:n, :n]
        return out

    @property
    def raw(self) -> np.ndarray:
        n = len(self.kets)
        return self._rho[:n, :n].copy()

    def trace(self) -> float:
        return float(np.trace(self.raw).real)

    def matrix(self, normalize: str | None = "trace") -> np.ndarray:
        """Accumulated matrix divided by its trace, by ``runs``, or not at all."""
        rho = self.raw
        if normalize == "trace":
            tr = np.trace(rho).real
            return rho / tr if tr > 0 else rho
        if normalize == "runs":
            return rho / self.runs if self.runs else rho
        if normalize is None:
            return rho
        raise ValueError(f"unknown normalization {normalize!r}")

    def entry(self, bra, ket, normalize: str | None = "trace") -> complex:
        i, j = self._index.get(tuple(bra)), self._index.get(tuple(ket))
        if i is None or j is None:
            return 0j
        return complex(self.matrix(normalize)[i, j])

    def reduced(self, min_weight: float = 0.0, normalize: str | None = "trace"):
        """``(kets, matrix)`` in display order, dropping rows lighter than ``min_weight``.

        ``min_weight`` is relative to the trace.
        """
        rho = self.matrix(normalize)
        tr = np.trace(self.raw).real or 1.0
        keep = [i for i in range(len(self.kets))
                if self._rho[i, i].real / tr >= min_weight]
        keep.sort(key=lambda i: self.kets[i], reverse=True)
        return [self.kets[i] for i in keep], rho[np.ix_(keep, keep)]

    def ket_text(self, ket) -> str:
        if self.mode_labels is None:
            return ", ".join(map(str, ket))
        parts = []
        for lab, n in zip(self.mode_labels, ket):
            if not isinstance(lab, OutcomeLabel):
                lab = OutcomeLabel(*lab)
            parts += [lab.text(self.polarized)] * n
        return ", ".join(parts)

    def format(self, min_weight: float = 0.0, decimals: int = 4,
               normalize: str | None = "trace") -> str:
        kets, rho = self.reduced(min_weight, normalize)
        texts = [f"| {self.ket_text(k)} >" for k in kets]
        width = max((len(t) for t in texts), default=0)
        lines = []
        for t, row in zip(texts, rho):
            vals = " ".join(f"{v.real: .{decimals}f}" for v in row)
            lines.append(f"{t.ljust(width)} {vals}")
        return "\n".join(lines)

    def __str__(self) -> str:
        return self.format()


# ---------------------------------------------------------------------------
# post-selection


def conditioned_modes(circuit: Circuit, cond: dict | None = None) -> list[int]:
    cond = circuit.conditions if cond is None else cond
    modes = []
    for ch in sorted(cond):
        modes += circuit.modes.channel_modes(ch)
    return modes


def _compositions(n: int, m: int):
    if m == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, m - 1):
            yield (first,) + rest


def enumerate_projectors(cond: dict[int, int], circuit: Circuit) -> list[tuple]:
    """Kets over the conditioned sub-modes whose channel totals meet ``cond``.

    Sub-modes are the polarization/packet modes of each conditioned channel,
    channels taken in increasing order.
    """
    per_channel = []
    sub = circuit.modes.npol * circuit.modes.npackets
    for ch in sorted(cond):
        if not 0 <= ch < circuit.nchannels:
            raise DimensionError(f"conditioned channel {ch} out of range")
        per_channel.append(list(_compositions(int(cond[ch]), sub)))
    if not per_channel:
        return [()]
    return [sum(parts, ()) for parts in itertools.product(*per_channel)]


def _retained(circuit: Circuit, cmodes: list[int]) -> list[int]:
    drop = set(cmodes)
    return [m for m in range(circuit.nmodes) if m not in drop]


def project(state: State, circuit: Circuit, projectors=None, cond=None):
    """Reduced states for each projector on the conditioned modes.

    Parameters
    ----------
    projectors : list of kets or States, optional
        Defaults to :func:`enumerate_projectors`. States (over the
        conditioned modes) allow projection onto entangled bases.

    Returns
    -------
    list of (projector, State)
        Reduced states keep only the non-conditioned modes, labeled
        ``(channel, pol, packet)``; empty projections are omitted.
    """
    if state.nmodes != circuit.nmodes:
        raise DimensionError(
            f"state has {state.nmodes} modes; post-selection needs the "
            f"{circuit.nmodes} physical modes (trace out losses first)"
        )
    cond = circuit.conditions if cond is None else cond
    cmodes = conditioned_modes(circuit, cond)
    keep = _retained(circuit, cmodes)
    labels = [OutcomeLabel(*circuit.modes.label(m)) for m in keep]
    if projectors is None:
        projectors = enumerate_projectors(cond, circuit)

    split: dict[tuple, list] = {}
    for ket, amp in state.items():
        c = tuple(ket[m] for m in cmodes)
        r = tuple(ket[m] for m in keep)
        split.setdefault(c, []).append((r, amp))

    out = []
    for proj in projectors:
        red = State(len(keep), labels=labels, max_occupation=state.max_occupation)
        if isinstance(proj, State):
            if proj.nmodes != len(cmodes):
                raise DimensionError("projector does not live on the conditioned modes")
            for c, pa in proj.items():
                for r, amp in split.get(c, ()):
                    red._add_unchecked(pa.conjugate() * amp, r)
        else:
            for r, amp in split.get(tuple(proj), ()):
                red._add_unchecked(amp, r)
        red = red.prune()
        if len(red):
            out.append((proj, red))
    return out


def apply_condition(state: State, circuit: Circuit) -> State:
    """Post-select on the detector conditions and drop the conditioned modes.

    The squared norm of the result is the success probability.

    Raises
    ------
    FockForgeError
        If outcomes of several distinct projectors survive (polarization or
        packet-resolved conditions); use :func:`project` and accumulate a
        density matrix instead.
    """
    parts = project(state, circuit)
    if len(parts) > 1:
        raise FockForgeError(
            f"{len(parts)} projectors satisfy the condition; use project() "
            "and a DensityMatrix for multi-projector post-selection"
        )
    if parts:
        return parts[0][1]
    cmodes = conditioned_modes(circuit)
    keep = _retained(circuit, cmodes)
    return State(len(keep), labels=[OutcomeLabel(*circuit.modes.label(m)) for m in keep])


# ---------------------------------------------------------------------------
# bins and detector kinds


def mode_bins(state: State, circuit: Circuit) -> ProbabilityBins:
    """Step 1: squared amplitudes over every mode (loss modes included)."""
    with_loss = state.nmodes == 2 * circuit.nmodes
    if not with_loss and state.nmodes != circuit.nmodes:
        raise DimensionError("state does not live on the circuit modes")
    bins = ProbabilityBins(_mode_labels(circuit, with_loss), polarized=circuit.polarized)
    for ket, amp in state.items():
        p = abs(amp) ** 2
        if p:
            bins.bins[ket] = bins.bins.get(ket, 0.0) + p
    return bins


def post_select(bins: ProbabilityBins, circuit: Circuit) -> ProbabilityBins:
    """Step 4: keep outcomes meeting the conditions; sum out loss modes."""
    cond = circuit.conditions
    chan_pos = {ch: bins.channel_positions(ch) for ch in cond}
    keep = [i for i, lab in enumerate(bins.labels) if lab.kind != "loss"]
    out = ProbabilityBins([bins.labels[i] for i in keep], polarized=bins.polarized)
    for ket, p in bins.items():
        if all(sum(ket[i] for i in chan_pos[ch]) == n for ch, n in cond.items()):
            k = tuple(ket[i] for i in keep)
            out.bins[k] = out.bins.get(k, 0.0) + p
    return out


def _relabel_map(labels: Sequence[OutcomeLabel], circuit: Circuit):
    cond = circuit.conditions
    new_labels: list[OutcomeLabel] = []
    where: dict[OutcomeLabel, int] = {}
    target = []
    per = circuit.packets_per_period
    for lab in labels:
        ch = lab.channel
        if lab.kind == "loss" or ch in cond or ch in circuit.ignored:
            target.append(-1)
            continue
        det = circuit.detectors.get(ch)
        kind = det.kind if det is not None else "full"
        if kind == "counter":
            new = OutcomeLabel(ch, lab.pol, None, "counter")
        elif kind == "timed":
            new = OutcomeLabel(ch, lab.pol, lab.index // per, "timed")
        else:
            new = OutcomeLabel(ch, lab.pol, lab.index, "full")
        if new not in where:
            where[new] = len(new_labels)
            new_labels.append(new)
        target.append(where[new])
    return new_labels, target


def relabel(bins: ProbabilityBins, circuit: Circuit) -> ProbabilityBins:
    """Step 5: drop conditioned/ignored channels and merge unresolved modes.

    Counters sum over packets, timed detectors keep the period index, full
    detectors (and channels without detector) keep every mode.
    """
    new_labels, target = _relabel_map(bins.labels, circuit)
    out = ProbabilityBins(new_labels, polarized=bins.polarized)
    n = len(new_labels)
    for ket, p in bins.items():
        occ = [0] * n
        for t, x in zip(target, ket):
            if t >= 0 and x:
                occ[t] += x
        k = tuple(occ)
        out.bins[k] = out.bins.get(k, 0.0) + p
    return out


def bins_from_state(state: State, circuit: Circuit, detectors=None) -> ProbabilityBins:
    """Outcome distribution of a state after post-selection and relabeling.

    ``detectors`` optionally overrides the circuit's detector table.
    """
    if detectors is not None:
        circuit = circuit.copy()
        circuit.detectors = {d.channel: d for d in detectors}
    return relabel(post_select(mode_bins(state, circuit), circuit), circuit)


# ---------------------------------------------------------------------------
# classical detector errors


def _sample_runs(bins: ProbabilityBins, rng, runs: int):
    outcomes = list(bins.bins)
    if not outcomes:
        return np.zeros((0, len(bins.labels)), dtype=np.int64), 0.0
    p = np.array([bins.bins[o] for o in outcomes])
    total = float(p.sum())
    idx = rng.choice(len(outcomes), size=runs, p=p / total)
    kets = np.array(outcomes, dtype=np.int64)[idx]
    return kets, total


def _rebin(bins: ProbabilityBins, kets: np.ndarray, total: float) -> ProbabilityBins:
    out = ProbabilityBins(bins.labels, polarized=bins.polarized)
    if len(kets) == 0:
        return out
    uniq, counts = np.unique(kets, axis=0, return_counts=True)
    w = total / len(kets)
    for row, c in zip(uniq, counts):
        out.bins[tuple(int(x) for x in row)] = c * w
    return out


def _rates(rate, bins: ProbabilityBins) -> dict[int, float]:
    if isinstance(rate, dict):
        return {int(k): float(v) for k, v in rate.items()}
    chans = sorted({lab.channel for lab in bins.labels if lab.kind != "loss"})
    return {ch: float(rate) for ch in chans}


def _apply_dark(kets, bins, rates, rng):
    for ch, lam in sorted(rates.items()):
        if lam <= 0:
            continue
        pos = bins.channel_positions(ch)
        if pos:
            kets[:, pos[0]] += rng.poisson(lam, size=len(kets))
    return kets


def _apply_dead(kets, bins, fractions, rng):
    for ch, f in sorted(fractions.items()):
        if f <= 0:
            continue
        pos = bins.channel_positions(ch)
        if not pos:
            continue
        off = rng.random(len(kets)) < f
        if off.any():
            sub = kets[off]
            sub[:, pos] = 0
            kets[off] = sub
    return kets


def dark_counts(bins: ProbabilityBins, rate, rng=None, runs: int = 100_000) -> ProbabilityBins:
    """Add Poisson(``rate``) spurious photons per detector channel and run.

    ``rate`` is a number (every channel) or ``{channel: rate}``. Extra
    photons go to the first sub-mode of the channel.
    """
    rates = _rates(rate, bins)
    if all(v <= 0 for v in rates.values()):
        return bins.copy()
    rng = np.random.default_rng(rng)
    kets, total = _sample_runs(bins, rng, runs)
    return _rebin(bins, _apply_dark(kets, bins, rates, rng), total)


def dead_time(bins: ProbabilityBins, blnk, rng=None, runs: int = 100_000) -> ProbabilityBins:
    """Reject each detector reading with probability ``blnk`` (reads zero)."""
    fractions = _rates(blnk, bins)
    for v in fractions.values():
        if not 0.0 <= v <= 1.0:
            raise ValueError("dead-time fraction must be in [0, 1]")
    if all(v <= 0 for v in fractions.values()):
        return bins.copy()
    rng = np.random.default_rng(rng)
    kets, total = _sample_runs(bins, rng, runs)
    return _rebin(bins, _apply_dead(kets, bins, fractions, rng), total)


def add_noise(bins: ProbabilityBins, stdev2: float, rng=None) -> ProbabilityBins:
    """Perturb every bin by N(0, ``stdev2``) and clamp at zero."""
    if stdev2 < 0:
        raise ValueError("noise variance must be non-negative")
    if stdev2 == 0:
        return bins.copy()
    rng = np.random.default_rng(rng)
    out = bins.copy()
    keys = list(out.bins)
    noise = rng.normal(0.0, math.sqrt(stdev2), size=len(keys))
    for k, e in zip(keys, noise):
        out.bins[k] = max(out.bins[k] + e, 0.0)
    return out


def detection_pipeline(raw: State, circuit: Circuit, rng=None,
                       runs: int = 100_000) -> ProbabilityBins:
    """Run the six detection steps on a raw output state.

    ``raw`` lives on the physical modes or, for lossy circuits, on the
    doubled mode space with loss modes last.
    """
    rng = np.random.default_rng(rng)
    bins = mode_bins(raw, circuit)  # 1
    dark = {ch: d.dark_rate for ch, d in circuit.detectors.items() if d.dark_rate > 0}
    dead = {ch: d.dead_fraction for ch, d in circuit.detectors.items() if d.dead_fraction > 0}
    if dark or dead:
        kets, total = _sample_runs(bins, rng, runs)
        kets = _apply_dark(kets, bins, dark, rng)  # 2
        kets = _apply_dead(kets, bins, dead, rng)  # 3
        bins = _rebin(bins, kets, total)
    bins = post_select(bins, circuit)  # 4
    bins = relabel(bins, circuit)  # 5
    return add_noise(bins, circuit.noise_stdev2, rng)  # 6


def translate(bins: ProbabilityBins, qmap) -> ProbabilityBins:
    """Re-express channel outcomes as qubit outcomes, dropping invalid ones."""
    from .state import _as_qmap

    qmap = _as_qmap(qmap)
    pos = {}
    for i, lab in enumerate(bins.labels):
        if lab.channel in qmap.channels:
            if lab.channel in pos:
                raise FockForgeError(
                    f"channel {lab.channel} is resolved into several outcomes; use counters"
                )
            pos[lab.channel] = i
    missing = qmap.channels - set(pos)
    if missing:
        raise FockForgeError(f"qubit channels {sorted(missing)} are not in the outcome")
    labels = [OutcomeLabel(q, 0, None, "qubit") for q in range(qmap.nqubits)]
    out = ProbabilityBins(labels)
    for ket, p in bins.items():
        bits = []
        for c0, c1 in qmap.pairs:
            pair = (ket[pos[c0]], ket[pos[c1]])
            if pair == (1, 0):
                bits.append(1)
            elif pair == (0, 1):
                bits.append(0)
            else:
                break
        else:
            k = tuple(bits)
            out.bins[k] = out.bins.get(k, 0.0) + p
    return out
