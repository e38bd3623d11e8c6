"""Stochastic measurement layer: ideal measurements with collapse, pointer
reading ensembles with and without post-selection, and disturbance.

Random streams are numpy Generators over the counter-based Philox bit
generator.  :func:`substream` derives an independent stream for each
``(seed, task)`` pair so sharded ensembles are reproducible regardless of
how shards are scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .config import DEFAULTS
from .errors import DimensionMismatch, TooImprobable, ZeroPostSelection
from .pointer import (
    POSITION,
    GaussianPointer,
    PointerDistribution,
    coherent_norm,
    moments,
    postselected_distribution,
)
from .qcore import Observable, StateVector, _frozen
from .textio import write_table
from .tsvf import TwoStateVector, selection_amplitudes

RandomLike = Union[int, np.random.Generator]

_BATCH = 1 << 16
# envelope constants above this trigger the moment-matched alternative
_LOOSE_ENVELOPE = 20.0


def substream(seed: int, task: int = 0) -> np.random.Generator:
    """Independent Philox stream for ``(seed, task)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(task)])))


def _as_rng(rng: RandomLike) -> tuple[np.random.Generator, Optional[int]]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    return substream(int(rng)), int(rng)


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    readings: np.ndarray
    postselected_count: int
    attempted_count: int
    seed: Optional[int] = None

    def __post_init__(self):
        if self.postselected_count != len(self.readings):
            raise ValueError("postselected_count must equal the number of readings")
        if self.postselected_count > self.attempted_count:
            raise ValueError("cannot accept more readings than were attempted")

    @property
    def acceptance_rate(self) -> float:
        return self.postselected_count / self.attempted_count if self.attempted_count else 0.0

    def mean(self) -> float:
        return float(np.mean(self.readings))

    def standard_error(self) -> float:
        n = len(self.readings)
        return float(np.std(self.readings, ddof=1) / math.sqrt(n)) if n > 1 else math.inf

    def to_text(self, meta: Optional[dict] = None) -> str:
        """Single-column ``reading`` table with seed and counts in the header."""
        header = {"seed": "none" if self.seed is None else self.seed,
                  "postselected_count": self.postselected_count,
                  "attempted_count": self.attempted_count}
        header.update(meta or {})
        return write_table(["reading"], ((r,) for r in self.readings), header)


def merge_records(records, seed: Optional[int] = None) -> MeasurementRecord:
    """Concatenate shard records in task order."""
    readings = np.concatenate([r.readings for r in records]) if records else np.empty(0)
    return MeasurementRecord(readings,
                             sum(r.postselected_count for r in records),
                             sum(r.attempted_count for r in records),
                             seed)


def run_sharded(sampler: Callable[[int, np.random.Generator], MeasurementRecord],
                n: int, seed: int, shards: int = 1,
                max_workers: Optional[int] = None) -> MeasurementRecord:
    """Split an ensemble of ``n`` into ``shards`` with disjoint substreams.

    ``sampler(count, rng)`` produces one shard.  Shards may run on a thread
    pool; the merge is always by shard index, so the result depends only on
    ``(n, seed, shards)``.
    """
    if shards < 1:
        raise ValueError("shards must be at least 1")
    sizes = [n // shards + (1 if k < n % shards else 0) for k in range(shards)]
    tasks = [(size, substream(seed, k)) for k, size in enumerate(sizes) if size > 0]
    if max_workers == 1 or len(tasks) == 1:
        parts = [sampler(size, rng) for size, rng in tasks]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(pool.map(lambda t: sampler(*t), tasks))
    return merge_records(parts, seed)


# -- ideal measurement ---------------------------------------------------------

def strong_measure(A: Observable, psi: StateVector, rng: RandomLike):
    """Ideal measurement of ``A`` with Lüders collapse.

    Returns ``(eigenvalue, collapsed_state)``.
    """
    if A.dimension != psi.dimension:
        raise DimensionMismatch(
            f"observable of dimension {A.dimension} with state of dimension {psi.dimension}"
        )
    gen, _ = _as_rng(rng)
    weights = A.group_weights(psi)
    weights = weights / weights.sum()
    g = int(gen.choice(len(weights), p=weights))
    projected = A.group_projectors[g] @ psi.amplitudes
    collapsed = StateVector(_frozen(projected / np.linalg.norm(projected)))
    return float(A.group_values[g]), collapsed


def strong_measure_counts(A: Observable, psi: StateVector, n: int, rng: RandomLike) -> dict:
    """Outcome histogram of ``n`` independent ideal measurements."""
    gen, _ = _as_rng(rng)
    weights = A.group_weights(psi)
    counts = gen.multinomial(n, weights / weights.sum())
    return {float(a): int(c) for a, c in zip(A.group_values, counts)}


# -- post-selection ------------------------------------------------------------

def postselection_probability(A: Observable, tsv: TwoStateVector,
                              pointer: Optional[GaussianPointer] = None) -> float:
    """Probability that the post-selection succeeds.

    Without a pointer this is ``|<post|pre>|^2``.  With a pointer the
    coupling partially decoheres the eigenspaces of ``A`` and the
    probability becomes
    ``sum_ij beta_i conj(beta_j) exp(-(a_i - a_j)^2 / 4 Delta^2)``.
    """
    if pointer is None:
        return float(abs(tsv.overlap) ** 2)
    beta = selection_amplitudes(A, tsv)
    return min(coherent_norm(beta, np.asarray(A.group_values, float), pointer.delta), 1.0)


def disturbance(A: Observable, psi: StateVector, pointer: GaussianPointer) -> float:
    """``1 - <psi|rho'|psi>`` for the system state ``rho'`` left by the coupling."""
    w = A.group_weights(psi)
    a = np.asarray(A.group_values, float)
    gram = np.exp(-((a[:, None] - a[None, :]) ** 2) / (4.0 * pointer.delta ** 2))
    fidelity = float(w @ gram @ w)
    return min(max(1.0 - fidelity, 0.0), 1.0)


# -- ensembles -----------------------------------------------------------------

def _draw_mixture(gen: np.random.Generator, centers, weights, sd: float, size: int) -> np.ndarray:
    comp = gen.choice(len(centers), size=size, p=weights)
    return centers[comp] + sd * gen.standard_normal(size)


def sample_preselected(A: Observable, psi: StateVector, pointer: GaussianPointer,
                       n: int, rng: RandomLike) -> MeasurementRecord:
    """``n`` pointer readings without post-selection.

    Each reading picks eigenspace ``g`` with its Born weight and then draws
    a normal variate of mean ``a_g`` and standard deviation ``Delta/sqrt(2)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    gen, seed = _as_rng(rng)
    w = A.group_weights(psi)
    centers = np.asarray(A.group_values, float)
    readings = _draw_mixture(gen, centers, w / w.sum(), pointer.delta / math.sqrt(2.0), n)
    return MeasurementRecord(readings, n, n, seed)


def _conditional_acceptance(q: np.ndarray, centers, beta, weights, delta: float) -> np.ndarray:
    """P(post | pointer reads q) for the pre-selected joint state."""
    expo = -((q[:, None] - centers[None, :]) ** 2) / (2.0 * delta ** 2)
    expo -= expo.max(axis=1, keepdims=True)
    g = np.exp(expo)
    amp = g @ beta
    den = (g * g) @ weights
    return np.clip((amp.real ** 2 + amp.imag ** 2) / den, 0.0, 1.0)


def sample_postselected(A: Observable, tsv: TwoStateVector, pointer: GaussianPointer,
                        n_target: int, rng: RandomLike, mode: str = "physical",
                        tol=DEFAULTS) -> MeasurementRecord:
    """Pointer readings from the post-selected sub-ensemble.

    ``mode="physical"`` simulates every run: a reading is drawn from the
    unconditioned pointer mixture and kept with the conditional probability
    that the post-selection then succeeds.  ``mode="direct"`` rejection
    samples the post-selected density itself, which stays cheap when the
    post-selection is rare.

    Raises
    ------
    TooImprobable
        Physical mode only, when the success probability is below
        ``tol.too_improbable`` or the expected number of attempts exceeds
        ``tol.attempt_cap``.
    """
    if n_target < 1:
        raise ValueError("n_target must be at least 1")
    gen, seed = _as_rng(rng)
    if mode == "physical":
        return _sample_physical(A, tsv, pointer, n_target, gen, seed, tol)
    if mode == "direct":
        dist = postselected_distribution(A, tsv, pointer)
        readings, attempts = rejection_sample(dist, n_target, gen, tol)
        return MeasurementRecord(readings, n_target, attempts, seed)
    raise ValueError(f"unknown sampling mode {mode!r}")


def _sample_physical(A, tsv, pointer, n_target, gen, seed, tol) -> MeasurementRecord:
    prob = postselection_probability(A, tsv, pointer)
    if prob < tol.too_improbable:
        raise TooImprobable(prob)
    if n_target / prob > tol.attempt_cap:
        raise TooImprobable(
            prob,
            f"post-selection probability {prob:.6e} needs about {n_target / prob:.3e} "
            f"attempts, above the cap {tol.attempt_cap:.0e}",
        )
    centers = np.asarray(A.group_values, float)
    weights = A.group_weights(tsv.pre)
    beta = selection_amplitudes(A, tsv)
    sd = pointer.delta / math.sqrt(2.0)
    p = weights / weights.sum()
    kept: list[np.ndarray] = []
    accepted = attempted = 0
    while accepted < n_target:
        if attempted >= tol.attempt_cap:
            raise TooImprobable(prob, f"attempt cap {tol.attempt_cap:.0e} reached "
                                      f"with {accepted} of {n_target} accepted")
        size = int(min(_BATCH, tol.attempt_cap - attempted))
        q = _draw_mixture(gen, centers, p, sd, size)
        ok = gen.random(size) < _conditional_acceptance(q, centers, beta, weights, pointer.delta)
        idx = np.flatnonzero(ok)
        need = n_target - accepted
        if idx.size >= need:
            # stop the attempt count at the run that completed the ensemble
            attempted += int(idx[need - 1]) + 1
            kept.append(q[idx[:need]])
            accepted = n_target
        else:
            attempted += size
            kept.append(q[idx])
            accepted += idx.size
    return MeasurementRecord(np.concatenate(kept), n_target, attempted, seed)


class _Proposal:
    """Normal mixture used as a rejection-sampling proposal."""

    def __init__(self, centers, weights, sd):
        self.centers = np.asarray(centers, float)
        self.weights = np.asarray(weights, float)
        self.sd = float(sd)

    def pdf(self, x):
        z = (np.asarray(x)[:, None] - self.centers[None, :]) / self.sd
        return (np.exp(-0.5 * z * z) @ self.weights) / (self.sd * math.sqrt(2.0 * math.pi))

    def draw(self, gen, size):
        return _draw_mixture(gen, self.centers, self.weights, self.sd, size)


def _scan_ratio(dist: PointerDistribution, proposal: _Proposal) -> float:
    lo, hi = dist.support()
    x = np.linspace(lo, hi, 1 << 14)
    m = proposal.pdf(x)
    mask = m > 1e-300
    return float(np.max(dist.pdf(x[mask]) / m[mask]))


def envelope_constant(dist: PointerDistribution, tol=DEFAULTS) -> float:
    """Bound ``c`` with ``pdf <= c * m`` for the |beta|^2-weighted mixture ``m``.

    A grid scan of the ratio, inflated by ``tol.envelope_inflation``, capped
    by the Cauchy-Schwarz bound ``K * sum|beta|^2 / norm`` for ``K`` branches.
    """
    return _mixture_envelope(dist, tol)[1]


def _mixture_envelope(dist, tol):
    w = np.abs(dist.coefficients) ** 2
    w_sum = float(w.sum())
    hard = len(w) * w_sum / dist.normalization
    proposal = _Proposal(dist.centers, w / w_sum, dist.delta / math.sqrt(2.0))
    return proposal, min(_scan_ratio(dist, proposal) * tol.envelope_inflation, hard)


def _widened_gaussian_envelope(dist, tol):
    # wider than every branch so the ratio vanishes in both tails
    mean, var = moments(dist)
    sd = max(1.5 * math.sqrt(max(var, 0.0)), 1.2 * dist.delta / math.sqrt(2.0))
    proposal = _Proposal([mean], [1.0], sd)
    return proposal, _scan_ratio(dist, proposal) * tol.envelope_inflation


def rejection_sample(dist: PointerDistribution, n: int, gen: np.random.Generator,
                     tol=DEFAULTS) -> tuple[np.ndarray, int]:
    """Draw ``n`` readings from a coherent position density.

    The proposal is the |beta|^2-weighted mixture of shifted pointer
    densities.  When interference makes that envelope loose (large ``c``,
    typical of anomalous weak values) a single widened Gaussian matched to
    the first two moments is used if it gives a smaller constant.

    Returns the readings and the number of proposals consumed.
    """
    if dist.kind != POSITION:
        raise ValueError("rejection sampling is implemented for position densities")
    if dist.normalization <= tol.zero_postselection:
        raise ZeroPostSelection("post-selected density has no mass")
    proposal, c = _mixture_envelope(dist, tol)
    if c > _LOOSE_ENVELOPE:
        alt, c_alt = _widened_gaussian_envelope(dist, tol)
        if c_alt < c:
            proposal, c = alt, c_alt
    batch = int(min(max(_BATCH, 2 * n * c), 1 << 22))
    kept: list[np.ndarray] = []
    accepted = attempted = 0
    while accepted < n:
        if attempted >= tol.attempt_cap:
            raise TooImprobable(1.0 / c, "rejection sampler exceeded the attempt cap")
        q = proposal.draw(gen, batch)
        ratio = dist.pdf(q) / (c * proposal.pdf(q))
        if ratio.max() > 1.0:
            raise ArithmeticError(f"rejection envelope violated (ratio {ratio.max():.4f})")
        ok = gen.random(batch) < ratio
        idx = np.flatnonzero(ok)
        need = n - accepted
        if idx.size >= need:
            attempted += int(idx[need - 1]) + 1
            kept.append(q[idx[:need]])
            accepted = n
        else:
            attempted += batch
            kept.append(q[idx])
            accepted += idx.size
    return np.concatenate(kept), attempted
