"""Outcome sampling without building the full output distribution.

Two samplers are provided:

* ``clifford_a_sample`` draws photons one at a time from exact conditional
  marginals (chain rule over permanents of growing sub-matrices);
* ``metropolis_sample`` runs an independence Metropolis chain whose
  proposals come from the distinguishable-photon distribution.

Samples are returned as an ``(nsamples, nmodes)`` integer array of
occupation vectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .cores import amplitude
from .errors import DimensionError, SamplerError
from .permanent import real_permanent

try:
    import numba as _nb
except ImportError:  # pragma: no cover
    _nb = None

UNITARY_TOL = 1e-8


@dataclass(frozen=True)
class SampleConfig:
    """Sampler settings.

    ``burn_in`` and ``thinning`` only affect the Metropolis chain: after
    ``burn_in`` steps the chain state is recorded every ``thinning`` steps.
    """

    nsamples: int = 10_000
    seed: int | None = None
    burn_in: int = 1000
    thinning: int = 10

    def __post_init__(self):
        if self.nsamples <= 0:
            raise ValueError("nsamples must be positive")
        if self.thinning < 1:
            raise ValueError("thinning must be at least 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")


def _check(input_ket, U, need_unitary: bool = True):
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError("sampling needs a square matrix")
    ket = np.asarray(input_ket, dtype=np.int64)
    if ket.shape != (U.shape[0],):
        raise DimensionError(f"input ket must have {U.shape[0]} modes")
    if (ket < 0).any():
        raise ValueError("negative occupation in input ket")
    if need_unitary and not np.allclose(U.conj().T @ U, np.eye(len(U)), atol=UNITARY_TOL):
        raise SamplerError(
            "matrix is not unitary; photon number is not conserved "
            "(dilate lossy circuits and sample on the doubled mode space)"
        )
    return ket, U


def occupations(modes: np.ndarray, nmodes: int) -> np.ndarray:
    """Turn ``(N, n)`` arrays of photon modes into ``(N, nmodes)`` occupations."""
    modes = np.asarray(modes, dtype=np.int64)
    out = np.zeros((modes.shape[0], nmodes), dtype=np.int64)
    rows = np.repeat(np.arange(modes.shape[0]), modes.shape[1])
    np.add.at(out, (rows, modes.ravel()), 1)
    return out


def histogram(samples: np.ndarray) -> dict[tuple, int]:
    """Count identical rows; keys are occupation tuples."""
    samples = np.asarray(samples)
    if samples.size == 0:
        return {}
    uniq, counts = np.unique(samples, axis=0, return_counts=True)
    return {tuple(int(x) for x in row): int(c) for row, c in zip(uniq, counts)}


def tv_distance(counts: dict, exact: dict) -> float:
    """Total-variation distance between an empirical histogram and a distribution."""
    total = sum(counts.values())
    keys = set(counts) | set(exact)
    return 0.5 * sum(abs(counts.get(k, 0) / total - exact.get(k, 0.0)) for k in keys)


# ---------------------------------------------------------------------------
# Clifford A


class _ChainRule:
    """Conditional photon-position distributions with prefix memoization.

    For an input occupation ``t`` and drawn output modes ``r_1..r_k`` the
    unnormalized marginal is the normally ordered correlation
    ``|| a_{r_k} ... a_{r_1} |psi> ||^2``. Expanding the annihilators
    over input modes gives a sum over sub-multisets ``c`` of ``t`` with
    ``|c| = k`` of ``|Per(U[r, rep(c)])|^2 * prod t!/((t-c)! c!^2)``.
    Permanents for the next photon follow from those of the prefix by a
    Laplace expansion along the new row.
    """

    def __init__(self, ket: np.ndarray, U: np.ndarray):
        self.U = U
        self.m = U.shape[0]
        self.cols = np.flatnonzero(ket)
        self.t = ket[self.cols]
        self.n = int(ket.sum())
        self._subsets = {}
        self._weights = {}
        # prefix (ordered tuple of modes) -> {multiset c: permanent}
        self._perms: dict[tuple, dict[tuple, complex]] = {(): {(0,) * len(self.cols): 1.0 + 0j}}
        self._cond: dict[tuple, np.ndarray] = {}
        self._vecs: dict[tuple, dict[tuple, np.ndarray]] = {}

    def _multisets(self, k: int):
        if k not in self._subsets:
            ranges = [range(int(x) + 1) for x in self.t]
            subs = [c for c in itertools.product(*ranges) if sum(c) == k]
            self._subsets[k] = subs
            for c in subs:
                w = 1.0
                for tj, cj in zip(self.t, c):
                    w *= math.factorial(tj) / (math.factorial(tj - cj) * math.factorial(cj) ** 2)
                self._weights[c] = w
        return self._subsets[k]

    def conditional(self, prefix: tuple) -> np.ndarray:
        """Normalized distribution of the next photon's mode."""
        cached = self._cond.get(prefix)
        if cached is not None:
            return cached
        prev = self._permanents(prefix)
        k = len(prefix) + 1
        w = np.zeros(self.m)
        vecs = {}
        for c in self._multisets(k):
            v = np.zeros(self.m, dtype=complex)
            for idx, cj in enumerate(c):
                if cj == 0:
                    continue
                lower = c[:idx] + (cj - 1,) + c[idx + 1:]
                p = prev.get(lower)
                if p:
                    v += cj * p * self.U[:, self.cols[idx]]
            vecs[c] = v
            w += self._weights[c] * np.abs(v) ** 2
        total = w.sum()
        if not total > 0:
            raise SamplerError("zero total probability in conditional marginal")
        probs = w / total
        self._cond[prefix] = probs
        self._vecs[prefix] = vecs
        return probs

    def _permanents(self, prefix: tuple) -> dict:
        perms = self._perms.get(prefix)
        if perms is None:
            head, r = prefix[:-1], prefix[-1]
            self.conditional(head)
            perms = {c: v[r] for c, v in self._vecs[head].items()}
            self._perms[prefix] = perms
        return perms

    def joint(self, modes) -> float:
        """Probability of the ordered draw sequence ``modes``."""
        p = 1.0
        for k, r in enumerate(modes):
            p *= self.conditional(tuple(modes[:k]))[r]
        return p


def clifford_a_sample(input_ket, U, cfg: SampleConfig | None = None) -> np.ndarray:
    """Draw outcomes photon by photon from exact conditional marginals.

    All samples share the memoized conditionals, so the permanent work
    grows with the number of distinct prefixes rather than with
    ``nsamples``.

    Returns
    -------
    ndarray of shape (nsamples, nmodes)
    """
    cfg = cfg or SampleConfig()
    ket, U = _check(input_ket, U)
    rng = np.random.default_rng(cfg.seed)
    N, m = cfg.nsamples, U.shape[0]
    chain = _ChainRule(ket, U)
    n = chain.n
    drawn = np.zeros((N, n), dtype=np.int64)
    for k in range(n):
        if k == 0:
            groups = [((), np.arange(N))]
        else:
            uniq, inv = np.unique(drawn[:, :k], axis=0, return_inverse=True)
            inv = inv.ravel()
            order = np.argsort(inv, kind="stable")
            bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
            groups = [(tuple(int(x) for x in uniq[g]), order[bounds[g]:bounds[g + 1]])
                      for g in range(len(uniq))]
        for prefix, rows in groups:
            probs = chain.conditional(prefix)
            drawn[rows, k] = rng.choice(m, size=len(rows), p=probs)
    return occupations(drawn, m)


# ---------------------------------------------------------------------------
# distinguishable photons and Metropolis


def _classical_weights(U: np.ndarray) -> np.ndarray:
    W = np.abs(U) ** 2
    norms = W.sum(axis=0)
    return W, norms


def _classical_modes(ket, U, size, rng) -> np.ndarray:
    W, norms = _classical_weights(U)
    if (norms[ket > 0] <= 0).any():
        raise SamplerError("an occupied input mode has a zero column")
    m = U.shape[0]
    modes = []
    for j in np.flatnonzero(ket):
        p = W[:, j] / norms[j]
        modes.append(rng.choice(m, size=(size, int(ket[j])), p=p))
    if not modes:
        return np.zeros((size, 0), dtype=np.int64)
    return np.concatenate(modes, axis=1)


def classical_sample(input_ket, U, nsamples: int | None = None, rng=None) -> np.ndarray:
    """Outcomes for distinguishable photons.

    A photon entering mode ``j`` lands in mode ``k`` with probability
    ``|U[k, j]|^2 / sum_k |U[k, j]|^2``, independently of the others.
    Returns one occupation vector, or an ``(nsamples, nmodes)`` array.
    """
    ket, U = _check(input_ket, U, need_unitary=False)
    rng = np.random.default_rng(rng)
    size = 1 if nsamples is None else nsamples
    occ = occupations(_classical_modes(ket, U, size, rng), U.shape[0])
    return occ[0] if nsamples is None else occ


def _codes(modes: np.ndarray, m: int):
    """Integer code per row of photon modes (order-insensitive) and the unique rows."""
    modes = np.sort(modes, axis=1)
    n = modes.shape[1]
    if n == 0:
        return np.zeros(len(modes), dtype=np.int64), np.zeros((1, m), dtype=np.int64)
    if n * math.log2(max(m, 2)) < 62:
        powers = m ** np.arange(n, dtype=np.int64)
        uniq_codes, inv = np.unique(modes @ powers, return_inverse=True)
        digits = (uniq_codes[:, None] // powers) % m
        return inv.ravel().astype(np.int64), occupations(digits, m)
    uniq, inv = np.unique(modes, axis=0, return_inverse=True)
    return inv.ravel().astype(np.int64), occupations(uniq, m)


def classical_probability(input_ket, output_ket, U) -> float:
    """Distinguishable-photon probability ``Per(W[rep(s), rep(t)]) / prod s!``.

    ``W`` is the column-normalized ``|U|^2``.
    """
    ket, U = _check(input_ket, U, need_unitary=False)
    out = np.asarray(output_ket, dtype=np.int64)
    if out.sum() != ket.sum():
        return 0.0
    W, norms = _classical_weights(U)
    occupied = ket > 0
    if (norms[occupied] <= 0).any():
        raise SamplerError("an occupied input mode has a zero column")
    W = W / np.where(norms > 0, norms, 1.0)
    rows = np.repeat(np.arange(len(out)), out)
    cols = np.repeat(np.arange(len(ket)), ket)
    denom = math.prod(math.factorial(int(s)) for s in out)
    return real_permanent(W[np.ix_(rows, cols)]) / denom


def _chain_py(props, ratio_num, u, burn_in, thinning, nsamples):
    cur = props[0]
    out = np.empty(nsamples, dtype=np.int64)
    accepted = 0
    step = 0
    kept = 0
    for s in range(1, len(props)):
        new = props[s]
        a = ratio_num[new] / ratio_num[cur] if ratio_num[cur] > 0 else 1.0
        if u[s] < a:
            cur = new
            accepted += 1
        step += 1
        if step > burn_in and (step - burn_in) % thinning == 0:
            out[kept] = cur
            kept += 1
            if kept == nsamples:
                break
    return out, accepted


_chain = _nb.njit(cache=True)(_chain_py) if _nb is not None else _chain_py


@dataclass
class MetropolisResult:
    samples: np.ndarray
    acceptance: float


def metropolis_sample(input_ket, U, cfg: SampleConfig | None = None,
                      return_stats: bool = False):
    """Independence Metropolis chain with distinguishable-photon proposals.

    A proposal ``s'`` is accepted with probability
    ``min(1, P(s') Pc(s) / (P(s) Pc(s')))`` where ``P`` is the boson
    probability (one permanent per distinct outcome, memoized) and ``Pc``
    the exact distinguishable-photon probability. After ``burn_in`` steps
    the current state is recorded every ``thinning`` steps.
    """
    cfg = cfg or SampleConfig()
    ket, U = _check(input_ket, U)
    rng = np.random.default_rng(cfg.seed)
    nsteps = 1 + cfg.burn_in + cfg.nsamples * cfg.thinning
    m = U.shape[0]
    inv, uniq = _codes(_classical_modes(ket, U, nsteps, rng), m)
    ratio = np.empty(len(uniq))
    for i, s in enumerate(uniq):
        pc = classical_probability(ket, s, U)
        p = abs(amplitude(tuple(ket), tuple(int(x) for x in s), U)) ** 2
        ratio[i] = p / pc if pc > 0 else 0.0
    if not ratio.max() > 0:
        raise SamplerError("no proposed outcome has non-zero probability")
    # start the chain at the first proposal with non-zero weight
    first = np.flatnonzero(ratio[inv] > 0)
    if len(first) == 0 or first[0] > cfg.burn_in:
        raise SamplerError("burn-in exhausted before reaching a non-zero-probability outcome")
    inv = inv[first[0]:]
    u = rng.random(len(inv))
    burn = cfg.burn_in - int(first[0])
    idx, accepted = _chain(inv, ratio, u, burn, cfg.thinning, cfg.nsamples)
    samples = uniq[idx].astype(np.int64)
    if return_stats:
        return MetropolisResult(samples, accepted / max(len(inv) - 1, 1))
    return samples


SAMPLERS = {"clifford": clifford_a_sample, "metropolis": metropolis_sample}


def sample(input_ket, U, cfg: SampleConfig | None = None, method: str = "clifford") -> np.ndarray:
    try:
        fn = SAMPLERS[method.lower()]
    except KeyError:
        raise ValueError(f"unknown sampling method {method!r}") from None
    return fn(input_ket, U, cfg)
