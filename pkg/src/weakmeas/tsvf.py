"""Pre- and post-selected systems: weak values, ABL probabilities and
element-of-reality classification.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import DEFAULTS
from .errors import DimensionMismatch, IncompatibleSelections, OrthogonalSelection
from .qcore import Observable, StateVector, inner


@dataclass(frozen=True, eq=False)
class TwoStateVector:
    """The pair (pre-selected ket, post-selected ket).

    ``overlap`` is ``<post|pre>``.  ``preselected_only`` marks a pair built
    from a single preparation with the post-selection set equal to it.
    """

    pre: StateVector
    post: StateVector
    overlap: complex = field(init=False)
    preselected_only: bool = False

    def __post_init__(self):
        if self.pre.dimension != self.post.dimension:
            raise DimensionMismatch(
                f"pre has dimension {self.pre.dimension}, post has {self.post.dimension}"
            )
        object.__setattr__(self, "overlap", inner(self.post, self.pre))

    @classmethod
    def preselected(cls, psi: StateVector) -> TwoStateVector:
        return cls(psi, psi, preselected_only=True)

    @property
    def dimension(self) -> int:
        return self.pre.dimension


def selection_amplitudes(A: Observable, tsv: TwoStateVector) -> np.ndarray:
    """``beta_g = <post|P_g|pre>`` for every eigengroup ``g`` of ``A``.

    The amplitudes sum to ``tsv.overlap``.
    """
    if A.dimension != tsv.dimension:
        raise DimensionMismatch(
            f"observable of dimension {A.dimension} with selections of dimension {tsv.dimension}"
        )
    pre = A.eigvecs.conj().T @ tsv.pre.amplitudes
    post = A.eigvecs.conj().T @ tsv.post.amplitudes
    terms = post.conj() * pre
    return np.array([terms[list(g)].sum() for g in A.eigengroups], dtype=complex)


@dataclass(frozen=True)
class WeakValueResult:
    value: complex
    overlap_magnitude: float

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag


def weak_value(A: Observable, tsv: TwoStateVector, guard: float = DEFAULTS.orthogonal_guard) -> WeakValueResult:
    """``<post|A|pre> / <post|pre>``.

    Raises
    ------
    OrthogonalSelection
        If ``|<post|pre>|`` is at or below ``guard``.
    """
    if A.dimension != tsv.dimension:
        raise DimensionMismatch(
            f"observable of dimension {A.dimension} with selections of dimension {tsv.dimension}"
        )
    mag = abs(tsv.overlap)
    if mag <= guard:
        raise OrthogonalSelection(mag, guard)
    numerator = np.vdot(tsv.post.amplitudes, A.matrix @ tsv.pre.amplitudes)
    value = complex(numerator / tsv.overlap)
    if tsv.preselected_only:
        value = complex(value.real, 0.0)
    return WeakValueResult(value, mag)


def abl_probability(A: Observable, tsv: TwoStateVector,
                    floor: float = DEFAULTS.abl_denominator) -> list[tuple[float, float]]:
    """Conditional probabilities of an intermediate ideal measurement of ``A``.

    ``P(a_g) = |<post|P_g|pre>|^2 / sum_k |<post|P_k|pre>|^2``, one entry
    per distinct eigenvalue.
    """
    weights = np.abs(selection_amplitudes(A, tsv)) ** 2
    total = weights.sum()
    if total <= floor:
        raise IncompatibleSelections(
            "no intermediate outcome is compatible with both the pre- and post-selection"
        )
    probs = weights / total
    return [(float(a), float(p)) for a, p in zip(A.group_values, probs)]


def coarse_grained_abl(A: Observable, fine: Observable, tsv: TwoStateVector,
                       floor: float = DEFAULTS.abl_denominator) -> list[tuple[float, float]]:
    """ABL probabilities for ``A`` read off a finer ideal measurement.

    ``fine`` must commute with ``A`` and refine its eigenspaces; the ABL
    rule is applied to the eigenspaces of ``fine`` and the results are
    summed into ``A``'s eigenvalues.  This differs from
    :func:`abl_probability` whenever the refinement splits an eigenspace,
    because the finer measurement destroys interference inside it.
    """
    if not A.commutes_with(fine):
        raise ValueError("the refining observable must commute with A")
    fine_table = abl_probability(fine, tsv, floor)
    totals = np.zeros(len(A.group_values))
    for (_, prob), proj in zip(fine_table, fine.group_projectors):
        # which eigenspace of A contains this eigenspace of fine
        overlaps = [np.real(np.trace(P @ proj)) for P in A.group_projectors]
        g = int(np.argmax(overlaps))
        if abs(overlaps[g] - np.real(np.trace(proj))) > 1e-9:
            raise ValueError("the refining observable does not refine A's eigenspaces")
        totals[g] += prob
    return [(float(a), float(p)) for a, p in zip(A.group_values, totals)]


def born_probability(A: Observable, psi: StateVector) -> list[tuple[float, float]]:
    """Outcome distribution of an ideal measurement on a pre-selected state."""
    return [(float(a), float(p)) for a, p in zip(A.group_values, A.group_weights(psi))]


def _certain_value(table, certainty_tol: float) -> Optional[float]:
    for value, prob in table:
        if prob >= 1.0 - certainty_tol:
            return value
    return None


def ideal_element_of_reality(A: Observable, tsv: TwoStateVector,
                             certainty_tol: float = DEFAULTS.certainty) -> Optional[float]:
    """The eigenvalue inferred with (numerical) certainty, or ``None``.

    For a pre-selected-only pair the Born rule is used instead of the ABL
    rule; both agree on which outcomes are certain.
    """
    if tsv.preselected_only:
        return _certain_value(born_probability(A, tsv.pre), certainty_tol)
    return _certain_value(abl_probability(A, tsv), certainty_tol)


def redhead_element_of_reality(A: Observable, psi: StateVector,
                               certainty_tol: float = DEFAULTS.certainty) -> Optional[float]:
    return _certain_value(born_probability(A, psi), certainty_tol)


@dataclass(frozen=True)
class RuleReport:
    lhs: complex
    rhs: complex
    equal: bool
    noncommuting: bool = False


def check_sum_rule(A: Observable, B: Observable, tsv: TwoStateVector,
                   atol: float = DEFAULTS.rule_equality) -> RuleReport:
    lhs = weak_value(A + B, tsv).value
    rhs = weak_value(A, tsv).value + weak_value(B, tsv).value
    return RuleReport(lhs, rhs, abs(lhs - rhs) < atol)


def check_product_rule(A: Observable, B: Observable, tsv: TwoStateVector,
                       atol: float = DEFAULTS.rule_equality) -> RuleReport:
    """Compare ``(AB)_w`` with ``A_w B_w``.

    Noncommuting factors are replaced by the symmetrized product
    ``(AB + BA)/2``; the report flags that case.
    """
    noncommuting = not A.commutes_with(B)
    prod = A.matrix @ B.matrix
    if noncommuting:
        prod = 0.5 * (prod + B.matrix @ A.matrix)
    lhs = weak_value(Observable(prod), tsv).value
    rhs = weak_value(A, tsv).value * weak_value(B, tsv).value
    return RuleReport(lhs, rhs, abs(lhs - rhs) < atol, noncommuting)


@dataclass(frozen=True)
class StrongWeakReport:
    status: str  # "pass", "fail" or "not-applicable"
    ideal_value: Optional[float]
    weak_value: Optional[complex]
    deviation: Optional[float]


def strong_implies_weak_check(A: Observable, tsv: TwoStateVector,
                              certainty_tol: float = DEFAULTS.certainty,
                              atol: float = DEFAULTS.strong_weak) -> StrongWeakReport:
    """Check that a certain ideal outcome ``a`` comes with ``A_w = a``."""
    try:
        ideal = ideal_element_of_reality(A, tsv, certainty_tol)
    except IncompatibleSelections:
        ideal = None
    try:
        wv = weak_value(A, tsv).value
    except OrthogonalSelection:
        wv = None
    if ideal is None or wv is None:
        return StrongWeakReport("not-applicable", ideal, wv, None)
    dev = abs(wv - ideal)
    return StrongWeakReport("pass" if dev < atol else "fail", ideal, wv, dev)


@dataclass(frozen=True)
class RealityReport:
    """Per-observable summary of ideal and weak elements of reality."""

    label: str
    ideal_value: Optional[float]
    abl_table: tuple[tuple[float, float], ...]
    weak_value: Optional[complex]
    rule: str = "abl"
    strong_weak: str = "not-applicable"

    def to_dict(self) -> dict:
        wv = self.weak_value
        return {
            "observable": self.label,
            "probability_rule": self.rule,
            "table": [{"eigenvalue": a, "probability": p} for a, p in self.abl_table],
            "ideal_element_of_reality": self.ideal_value,
            "weak_value": None if wv is None else {"real": wv.real, "imag": wv.imag},
            "strong_implies_weak": self.strong_weak,
        }

    def to_text(self) -> str:
        ideal = "none" if self.ideal_value is None else f"{self.ideal_value:.17g}"
        lines = [f"observable: {self.label}",
                 f"probability rule: {self.rule}"]
        for a, p in self.abl_table:
            lines.append(f"  eigenvalue {a:.17g}: probability {p:.17g}")
        lines.append(f"ideal element of reality: {ideal}")
        if self.weak_value is None:
            lines.append("weak value: undefined (orthogonal selections)")
        else:
            lines.append(f"weak value real: {self.weak_value.real:.17g}")
            lines.append(f"weak value imag: {self.weak_value.imag:.17g}")
        lines.append(f"strong implies weak: {self.strong_weak}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def reality_report(label: str, A: Observable, tsv: TwoStateVector,
                   certainty_tol: float = DEFAULTS.certainty) -> RealityReport:
    """Build a :class:`RealityReport`.

    Orthogonal selections still produce a report with no weak value;
    callers that need the error should call :func:`weak_value` directly.
    """
    if tsv.preselected_only:
        table, rule = born_probability(A, tsv.pre), "born"
    else:
        table, rule = abl_probability(A, tsv), "abl"
    ideal = _certain_value(table, certainty_tol)
    try:
        wv = weak_value(A, tsv).value
    except OrthogonalSelection:
        wv = None
    check = strong_implies_weak_check(A, tsv, certainty_tol)
    return RealityReport(label, ideal, tuple(table), wv, rule, check.status)

