"""Gaussian pointer distributions after an impulsive ``H = g(t) P A``
coupling.

The pointer starts in ``(Delta^2 pi)^(-1/4) exp(-Q^2 / 2 Delta^2)`` so its
position density has variance ``Delta^2 / 2``.  After the coupling each
eigenspace of ``A`` carries the pointer wavefunction shifted by its
eigenvalue.  Densities are evaluated from closed forms; moments come from
composite Simpson quadrature with successive doubling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq
from scipy.special import ndtr

from .config import DEFAULTS
from .errors import DimensionMismatch, QuadratureNotConverged, ZeroPostSelection
from .qcore import Observable, StateVector
from .textio import write_table
from .tsvf import TwoStateVector, selection_amplitudes

POSITION = "position"
MOMENTUM = "momentum"

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class GaussianPointer:
    delta: float

    def __post_init__(self):
        d = float(self.delta)
        if not (d > 0.0 and math.isfinite(d)):
            raise ValueError(f"pointer width must be positive and finite, got {self.delta!r}")
        object.__setattr__(self, "delta", d)


def initial_density(pointer: GaussianPointer, q):
    """Pointer position density before the interaction."""
    d = pointer.delta
    q = np.asarray(q, dtype=float)
    return np.exp(-(q / d) ** 2) / (_SQRT_PI * d)


def coherent_norm(beta: np.ndarray, centers: np.ndarray, delta: float) -> float:
    """``sum_ij beta_i conj(beta_j) exp(-(a_i - a_j)^2 / 4 Delta^2)``.

    This is the probability that the post-selection succeeds after the
    pointer has been coupled.
    """
    diff = centers[:, None] - centers[None, :]
    gram = np.exp(-(diff ** 2) / (4.0 * delta ** 2))
    value = np.real(np.vdot(beta, gram @ beta))
    return max(float(value), 0.0)


@dataclass(frozen=True, eq=False)
class PointerDistribution:
    """Normalized pointer density in position or momentum.

    With ``coherent`` true the density is proportional to
    ``|sum_i beta_i phi(Q - a_i)|^2``; otherwise it is the incoherent
    mixture ``sum_i w_i |phi(Q - a_i)|^2`` with the weights stored in
    ``coefficients``.
    """

    kind: str
    coefficients: np.ndarray
    centers: np.ndarray
    delta: float
    normalization: float
    coherent: bool = True

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        d = self.delta
        a = self.centers
        if self.kind == POSITION:
            if self.coherent:
                g = np.exp(-((flat[:, None] - a[None, :]) ** 2) / (2.0 * d * d))
                amp = g @ self.coefficients
                dens = (amp.real ** 2 + amp.imag ** 2) / (_SQRT_PI * d)
            else:
                g = np.exp(-((flat[:, None] - a[None, :]) ** 2) / (d * d))
                dens = (g @ np.real(self.coefficients)) / (_SQRT_PI * d)
        else:
            env = np.exp(-(d * flat) ** 2) * d / _SQRT_PI
            if self.coherent:
                phase = np.exp(-1j * flat[:, None] * a[None, :])
                amp = phase @ self.coefficients
                dens = env * (amp.real ** 2 + amp.imag ** 2)
            else:
                dens = env * np.real(self.coefficients).sum()
        return (dens / self.normalization).reshape(x.shape)

    def cdf(self, x):
        """Closed-form cumulative distribution (position kind only)."""
        if self.kind != POSITION:
            raise ValueError("closed-form CDF is only available for position densities")
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        d = self.delta
        a = self.centers
        if self.coherent:
            b = self.coefficients
            mid = 0.5 * (a[:, None] + a[None, :])
            weight = np.real(b[:, None] * b.conj()[None, :])
            weight = weight * np.exp(-((a[:, None] - a[None, :]) ** 2) / (4.0 * d * d))
            mid, weight = mid.ravel(), weight.ravel()
        else:
            mid, weight = a, np.real(self.coefficients)
        # each product of two shifted pointer Gaussians is a Gaussian of
        # standard deviation Delta / sqrt(2) about the midpoint
        z = (flat[:, None] - mid[None, :]) * (math.sqrt(2.0) / d)
        val = ndtr(z) @ weight
        return (val / self.normalization).reshape(x.shape)

    def mass_between(self, lo: float, hi: float) -> float:
        lo_hi = self.cdf(np.array([lo, hi]))
        return float(lo_hi[1] - lo_hi[0])

    def support(self, span: float = DEFAULTS.quad_span) -> tuple[float, float]:
        """Integration window outside which the density is negligible."""
        if self.kind == POSITION:
            # Gaussian tails of width Delta about the outermost centers
            lo, hi = float(self.centers.min()), float(self.centers.max())
            return lo - span * self.delta, hi + span * self.delta
        half = span / self.delta
        return -half, half

    def resolution(self) -> float:
        """Grid spacing needed before a quadrature estimate is trusted."""
        if self.kind == POSITION:
            return self.delta / 4.0
        spread = float(self.centers.max() - self.centers.min())
        scale = 1.0 / self.delta
        if spread > 0:
            scale = min(scale, 2.0 * math.pi / spread)
        return scale / 4.0


def _eigen_centers(A: Observable) -> np.ndarray:
    return np.array(A.group_values, dtype=float)


def preselected_distribution(A: Observable, psi: StateVector,
                             pointer: GaussianPointer) -> PointerDistribution:
    """Pointer position density for a pre-selected system.

    An incoherent mixture of shifted initial densities weighted by the Born
    weights of ``psi`` in the eigenspaces of ``A``.
    """
    if A.dimension != psi.dimension:
        raise DimensionMismatch(
            f"observable of dimension {A.dimension} with state of dimension {psi.dimension}"
        )
    weights = A.group_weights(psi).astype(complex)
    return PointerDistribution(POSITION, weights, _eigen_centers(A), pointer.delta,
                               float(np.real(weights.sum())), coherent=False)


def postselected_distribution(A: Observable, tsv: TwoStateVector, pointer: GaussianPointer,
                              kind: str = POSITION) -> PointerDistribution:
    """Pointer density conditioned on a successful post-selection.

    Position: proportional to ``|sum_g beta_g exp(-(Q - a_g)^2 / 2 Delta^2)|^2``.
    Momentum: proportional to ``exp(-Delta^2 P^2) |sum_g beta_g exp(-i a_g P)|^2``.
    Here ``beta_g = <post|P_g|pre>``.  Both share the same normalization,
    the post-selection probability.

    Raises
    ------
    ZeroPostSelection
        If the post-selection probability underflows.
    """
    if kind not in (POSITION, MOMENTUM):
        raise ValueError(f"kind must be {POSITION!r} or {MOMENTUM!r}, got {kind!r}")
    beta = selection_amplitudes(A, tsv)
    centers = _eigen_centers(A)
    norm = coherent_norm(beta, centers, pointer.delta)
    if norm <= DEFAULTS.zero_postselection:
        raise ZeroPostSelection(f"post-selection probability {norm:.3e} underflows")
    return PointerDistribution(kind, beta, centers, pointer.delta, norm, coherent=True)


def initial_distribution(pointer: GaussianPointer) -> PointerDistribution:
    one = np.array([1.0 + 0j])
    return PointerDistribution(POSITION, one, np.array([0.0]), pointer.delta, 1.0, coherent=False)


# -- quadrature ---------------------------------------------------------------

def _simpson_moments(dist: PointerDistribution, lo: float, hi: float, n: int) -> np.ndarray:
    x = np.linspace(lo, hi, n)
    f = dist.pdf(x)
    return np.array([simpson(f, x=x), simpson(x * f, x=x), simpson(x * x * f, x=x)])


def _summarize(raw: np.ndarray) -> tuple[float, float, float]:
    mass, first, second = raw
    mean = first / mass
    var = second / mass - mean * mean
    return float(mass), float(mean), float(var)


def quadrature_moments(dist: PointerDistribution, tol=DEFAULTS) -> tuple[float, float, float]:
    """Return ``(mass, mean, variance)`` by refined composite Simpson.

    The point count starts at ``2**11 + 1`` (or higher if the density needs
    finer spacing) and doubles until the relative change of all three
    numbers falls below ``tol.quad_rtol``.
    """
    lo, hi = dist.support(tol.quad_span)
    k = tol.quad_start_exponent
    need = (hi - lo) / dist.resolution()
    while 2 ** k < need and k < tol.quad_cap_exponent - 1:
        k += 1
    prev = _summarize(_simpson_moments(dist, lo, hi, 2 ** k + 1))
    change = math.inf
    while k < tol.quad_cap_exponent:
        k += 1
        cur = _summarize(_simpson_moments(dist, lo, hi, 2 ** k + 1))
        change = _relative_change(prev, cur)
        prev = cur
        if change < tol.quad_rtol:
            return cur
    if change > tol.quad_fail_rtol:
        raise QuadratureNotConverged(
            f"moments changed by relative {change:.2e} at 2**{k}+1 points"
        )
    return prev


def _relative_change(a, b) -> float:
    mass0, mean0, var0 = a
    mass1, mean1, var1 = b
    scale = max(abs(mean1), math.sqrt(abs(var1)), 1e-300)
    return max(abs(mass1 - mass0) / max(abs(mass1), 1e-300),
               abs(mean1 - mean0) / scale,
               abs(var1 - var0) / max(abs(var1), 1e-300))


def moments(dist: PointerDistribution) -> tuple[float, float]:
    """Mean and variance of a pointer distribution."""
    _, mean, var = quadrature_moments(dist)
    return mean, var


def shifted_gaussian_distance(dist: PointerDistribution, shift: float) -> float:
    """Total-variation distance between ``dist`` and the initial pointer
    density translated by ``shift``.

    The difference of densities is split at its sign changes, located on a
    grid and polished with Brent's method; the integral over each piece is
    then exact through the closed-form CDFs.
    """
    if dist.kind != POSITION:
        raise ValueError("shifted_gaussian_distance requires a position distribution")
    d = dist.delta
    ref = PointerDistribution(POSITION, np.array([1.0 + 0j]), np.array([float(shift)]), d,
                              1.0, coherent=False)
    lo, hi = dist.support()
    lo, hi = min(lo, shift - DEFAULTS.quad_span * d), max(hi, shift + DEFAULTS.quad_span * d)
    n = int(min(max(4097, math.ceil((hi - lo) / (d / 8.0)) + 1), 2 ** 18 + 1))
    x = np.linspace(lo, hi, n)
    f, g = dist.pdf(x), ref.pdf(x)
    diff = f - g
    noise = 1e-12 * max(float(f.max()), float(g.max()))
    sign = np.where(np.abs(diff) <= noise, 0, np.sign(diff)).astype(int)

    def h(t):
        return float(dist.pdf(np.array([t]))[0] - ref.pdf(np.array([t]))[0])

    cuts = []
    nz = np.flatnonzero(sign)
    for i0, i1 in zip(nz[:-1], nz[1:]):
        if sign[i0] == sign[i1]:
            continue
        if i1 == i0 + 1:
            cuts.append(brentq(h, x[i0], x[i1], xtol=1e-14 * max(1.0, abs(x[i0])), rtol=1e-14))
        else:
            # a run of numerically-zero difference separates the two signs
            cuts.append(0.5 * (x[i0] + x[i1]))
    edges = np.array([-np.inf, *cuts, np.inf])
    cum = np.zeros(len(edges))
    inner_edges = edges[1:-1]
    if inner_edges.size:
        cum[1:-1] = dist.cdf(inner_edges) - ref.cdf(inner_edges)
    tv = 0.5 * float(np.abs(np.diff(cum)).sum())
    return min(max(tv, 0.0), 1.0)


# -- export -------------------------------------------------------------------

def density_table(dist: PointerDistribution, n_points: int = 401,
                  lo: float | None = None, hi: float | None = None,
                  meta: dict | None = None) -> str:
    """Two-column ``q,density`` (or ``p,density``) text with a metadata header."""
    if n_points < 2:
        raise ValueError("density table needs at least two points")
    s_lo, s_hi = dist.support(5.0)
    lo = s_lo if lo is None else lo
    hi = s_hi if hi is None else hi
    x = np.linspace(lo, hi, n_points)
    header_meta = {"kind": dist.kind, "delta": dist.delta,
                   "grid": f"linspace({lo:.17g}, {hi:.17g}, {n_points})"}
    header_meta.update(meta or {})
    axis = "q" if dist.kind == POSITION else "p"
    return write_table([axis, "density"], zip(x, dist.pdf(x)), header_meta)
