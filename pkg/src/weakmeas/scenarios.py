"""Canonical pre-/post-selection experiments as executable fixtures.

Each :class:`Scenario` carries its states, labeled observables and a table
of expected values tagged with where the value comes from:

``LITERATURE``  stated outright in the published analysis,
``COMPUTED``    obtained independently (hand arithmetic, brute force),
``IDENTITY``    follows directly from a definition.

:func:`verify` recomputes every entry through the live pipeline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, InvalidSpin
from .measure import postselection_probability
from .pointer import GaussianPointer, moments, preselected_distribution
from .qcore import (
    Observable,
    StateVector,
    make_state,
    op_tensor,
    pauli,
    projector,
    spin_coherent_state,
    spin_operator,
)
from .tsvf import (
    TwoStateVector,
    abl_probability,
    born_probability,
    ideal_element_of_reality,
    weak_value,
)

PROVENANCE = ("LITERATURE", "COMPUTED", "IDENTITY")
MAX_SPIN = 12


@dataclass(frozen=True)
class Expected:
    """One expected value.

    ``quantity`` is one of ``weak_value``, ``abl``, ``born``, ``ideal``,
    ``postselection_probability``, ``expectation`` or ``pointer_shift``.
    ``outcome`` selects the eigenvalue for ``abl``/``born`` rows and
    ``delta`` the pointer width for ``pointer_shift`` rows.
    """

    quantity: str
    value: Optional[complex]
    provenance: str
    label: Optional[str] = None
    outcome: Optional[float] = None
    delta: Optional[float] = None
    tol: float = 1e-12
    note: str = ""

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance tag {self.provenance!r}")


@dataclass(frozen=True)
class Discrepancy:
    """A literature statement that the computation does not reproduce."""

    quantity: str
    stated: str
    computed: float
    note: str


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    pre: StateVector
    post: Optional[StateVector]
    observables: tuple[tuple[str, Observable], ...]
    expected: tuple[Expected, ...]
    description: str = ""
    default_observable: Optional[str] = None
    discrepancies: tuple[Discrepancy, ...] = field(default_factory=tuple)

    def __post_init__(self):
        dim = self.pre.dimension
        if self.post is not None and self.post.dimension != dim:
            raise DimensionMismatch("pre and post dimensions differ")
        for label, obs in self.observables:
            if obs.dimension != dim:
                raise DimensionMismatch(f"observable {label!r} has dimension {obs.dimension}, "
                                        f"system has {dim}")

    @property
    def dimension(self) -> int:
        return self.pre.dimension

    @property
    def tsv(self) -> TwoStateVector:
        if self.post is None:
            return TwoStateVector.preselected(self.pre)
        return TwoStateVector(self.pre, self.post)

    def observable(self, label: Optional[str] = None) -> Observable:
        label = label or self.default_observable or self.observables[0][0]
        for name, obs in self.observables:
            if name == label:
                return obs
        known = ", ".join(name for name, _ in self.observables)
        raise KeyError(f"scenario {self.name!r} has no observable {label!r} (known: {known})")

    @property
    def labels(self) -> list[str]:
        return [name for name, _ in self.observables]

    def to_dict(self) -> dict:
        def state(psi):
            return None if psi is None else [[z.real, z.imag] for z in psi.amplitudes]

        def value(v):
            if v is None:
                return None
            v = complex(v)
            return {"real": v.real, "imag": v.imag}

        return {
            "name": self.name,
            "description": self.description,
            "dimension": self.dimension,
            "pre": state(self.pre),
            "post": state(self.post),
            "observables": self.labels,
            "default_observable": self.default_observable,
            "expected": [
                {"quantity": e.quantity, "observable": e.label, "outcome": e.outcome,
                 "delta": e.delta, "value": value(e.value), "tolerance": e.tol,
                 "provenance": e.provenance, "note": e.note}
                for e in self.expected
            ],
            "discrepancies": [
                {"quantity": d.quantity, "stated": d.stated, "computed": d.computed,
                 "note": d.note}
                for d in self.discrepancies
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# -- fixtures -----------------------------------------------------------------

def three_box() -> Scenario:
    """One particle, boxes A, B, C; pre (1,1,1)/sqrt3, post (1,1,-1)/sqrt3."""
    pa, pb, pc = (projector([k], 3) for k in range(3))
    obs = (
        ("Pi_A", pa),
        ("Pi_B", pb),
        ("Pi_C", pc),
        ("Pi_A+Pi_B", pa + pb),
        ("Pi_A+Pi_B+Pi_C", pa + pb + pc),
        ("Pi_A*Pi_B", pa @ pb),
    )
    weak = [("Pi_A", 1, "LITERATURE"), ("Pi_B", 1, "LITERATURE"), ("Pi_C", -1, "LITERATURE"),
            ("Pi_A+Pi_B", 2, "LITERATURE"), ("Pi_A+Pi_B+Pi_C", 1, "LITERATURE"),
            ("Pi_A*Pi_B", 0, "LITERATURE")]
    expected = [Expected("weak_value", v, tag, label) for label, v, tag in weak]
    expected += [
        Expected("abl", 1.0, "LITERATURE", "Pi_A", outcome=1.0),
        Expected("abl", 1.0, "LITERATURE", "Pi_B", outcome=1.0),
        Expected("abl", 4 / 5, "COMPUTED", "Pi_A+Pi_B", outcome=1.0,
                 note="(2/3)^2 / ((2/3)^2 + (1/3)^2) for the degenerate A-or-B projector"),
        Expected("born", 2 / 3, "LITERATURE", "Pi_A+Pi_B", outcome=1.0,
                 note="pre-selection alone; also equals the coarse-grained A/B/C ABL value"),
        Expected("ideal", 1.0, "LITERATURE", "Pi_A"),
        Expected("ideal", 1.0, "LITERATURE", "Pi_B"),
        Expected("ideal", None, "LITERATURE", "Pi_A+Pi_B"),
        Expected("ideal", 1.0, "LITERATURE", "Pi_A+Pi_B+Pi_C"),
        Expected("ideal", 0.0, "LITERATURE", "Pi_A*Pi_B"),
        Expected("postselection_probability", 1 / 9, "COMPUTED", note="|1/3|^2"),
    ]
    disc = (Discrepancy(
        "abl[Pi_A+Pi_B=1]", "2/3", 4 / 5,
        "2/3 is the pre-selection-only Born probability and the ABL value of a "
        "non-degenerate A/B/C measurement coarse-grained to 'A or B'; the "
        "degenerate A-or-B projector gives 4/5"),)
    return Scenario("three-box", make_state([1, 1, 1]), make_state([1, 1, -1]), obs,
                    tuple(expected), "single particle in three boxes, the three-box paradox",
                    default_observable="Pi_C", discrepancies=disc)


def spin_bisector(N: int = 2) -> Scenario:
    """Spin-N prepared with S_x = N and found with S_y = N; S_xi bisects x and y."""
    if isinstance(N, bool) or int(N) != N or N < 1 or N > MAX_SPIN:
        raise InvalidSpin(f"spin_bisector needs an integer 1 <= N <= {MAX_SPIN}, got {N!r}")
    N = int(N)
    r = 1.0 / math.sqrt(2.0)
    x_hat, y_hat, xi_hat = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (r, r, 0.0)
    pre, post = spin_coherent_state(N, x_hat), spin_coherent_state(N, y_hat)
    obs = (("S_x", spin_operator(N, x_hat)),
           ("S_y", spin_operator(N, y_hat)),
           ("S_xi", spin_operator(N, xi_hat)))
    prob = 4.0 ** (-N)
    expected = (
        Expected("weak_value", math.sqrt(2.0) * N, "LITERATURE", "S_xi", tol=1e-9),
        Expected("weak_value", N, "COMPUTED", "S_x", tol=1e-9,
                 note="pre-selected eigenstate of S_x"),
        Expected("weak_value", N, "COMPUTED", "S_y", tol=1e-9,
                 note="post-selected eigenstate of S_y"),
        Expected("ideal", float(N), "COMPUTED", "S_x", tol=1e-9),
        Expected("ideal", float(N), "COMPUTED", "S_y", tol=1e-9),
        Expected("postselection_probability", prob, "COMPUTED", tol=1e-10,
                 note="|<S_y=N|S_x=N>|^2 = ((1 + x.y)/2)^(2N) = 4^-N"),
    )
    disc = (Discrepancy(
        "postselection_probability", f"2^-{N} = {2.0 ** -N:.6g}", prob,
        "2^-N matches N spin-1/2 particles each post-selected along y; a single "
        "spin-N representation gives 4^-N"),)
    return Scenario(f"spin-bisector-{N}", pre, post, obs, expected,
                    f"spin {N}: pre S_x={N}, post S_y={N}, weak value of S_xi exceeds {N}",
                    default_observable="S_xi", discrepancies=disc)


def epr_singlet() -> Scenario:
    """Two spin-1/2 particles in the singlet state, pre-selection only."""
    sz, sx, one = pauli("z"), pauli("x"), pauli("i")
    obs = (("sigma_z(x)I", op_tensor(sz, one)),
           ("sigma_x(x)I", op_tensor(sx, one)),
           ("sigma_z(x)sigma_z", op_tensor(sz, sz)))
    expected = (
        Expected("expectation", 0.0, "IDENTITY", "sigma_z(x)I"),
        Expected("expectation", 0.0, "IDENTITY", "sigma_x(x)I"),
        Expected("expectation", -1.0, "IDENTITY", "sigma_z(x)sigma_z"),
        Expected("ideal", None, "LITERATURE", "sigma_z(x)I"),
        Expected("ideal", None, "LITERATURE", "sigma_x(x)I"),
        Expected("ideal", -1.0, "IDENTITY", "sigma_z(x)sigma_z"),
        Expected("born", 0.5, "IDENTITY", "sigma_z(x)I", outcome=1.0),
    )
    return Scenario("epr-singlet", make_state([0, 1, -1, 0]), None, obs, expected,
                    "EPR singlet: no local element of reality for single-particle spin",
                    default_observable="sigma_z(x)I")


def expectation_demo(psi: StateVector, A: Observable, name: str = "expectation",
                     label: str = "A", delta: float = 1.0) -> Scenario:
    """Pre-selected only; the weak shift of the pointer is ``<psi|A|psi>``."""
    if A.dimension != psi.dimension:
        raise DimensionMismatch(
            f"observable of dimension {A.dimension} with state of dimension {psi.dimension}"
        )
    mean = A.expectation(psi)
    expected = (
        Expected("weak_value", mean, "COMPUTED", label, tol=1e-12),
        Expected("pointer_shift", mean, "COMPUTED", label, delta=delta, tol=1e-9,
                 note="incoherent-mixture mean, exact for every pointer width"),
    )
    return Scenario(name, psi, None, ((label, A),), expected,
                    "pre-selected system: weak measurement yields the expectation value",
                    default_observable=label)


def qubit_imaginary() -> Scenario:
    """Qubit pre (1,0), post (1,i)/sqrt2, A = sigma_x, weak value -i."""
    expected = (
        Expected("weak_value", -1j, "COMPUTED", "sigma_x", note="(1/sqrt2)(-i)/(1/sqrt2)"),
        Expected("postselection_probability", 0.5, "IDENTITY"),
    )
    return Scenario("qubit-imaginary", make_state([1, 0]), make_state([1, 1j]),
                    (("sigma_x", pauli("x")),), expected,
                    "purely imaginary weak value shifting the pointer momentum",
                    default_observable="sigma_x")


def _qubit_superposition() -> Scenario:
    return expectation_demo(make_state([1, 1]), pauli("z"), "qubit-superposition", "sigma_z")


def _qubit_eigenstate() -> Scenario:
    return expectation_demo(make_state([1, 0]), pauli("z"), "qubit-eigenstate", "sigma_z")


REGISTRY: dict[str, Callable[..., Scenario]] = {
    "three-box": three_box,
    "spin-bisector": spin_bisector,
    "epr-singlet": epr_singlet,
    "qubit-superposition": _qubit_superposition,
    "qubit-eigenstate": _qubit_eigenstate,
    "qubit-imaginary": qubit_imaginary,
}


def get_scenario(name: str, spin: Optional[int] = None) -> Scenario:
    """Look up a registered scenario; ``spin`` parameterizes ``spin-bisector``."""
    if name.startswith("spin-bisector-") and spin is None:
        name, spin = "spin-bisector", int(name.rsplit("-", 1)[1])
    if name not in REGISTRY:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(REGISTRY)}")
    if name == "spin-bisector":
        return spin_bisector(2 if spin is None else spin)
    return REGISTRY[name]()


# -- verification -------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    expected: Expected
    computed: Optional[complex]
    passed: bool


def _compute(scn: Scenario, e: Expected):
    tsv = scn.tsv
    if e.quantity == "postselection_probability":
        return postselection_probability(None, tsv)
    A = scn.observable(e.label)
    if e.quantity == "weak_value":
        return weak_value(A, tsv).value
    if e.quantity == "expectation":
        return A.expectation(scn.pre)
    if e.quantity == "ideal":
        return ideal_element_of_reality(A, tsv)
    if e.quantity in ("abl", "born"):
        table = abl_probability(A, tsv) if e.quantity == "abl" else born_probability(A, scn.pre)
        for value, prob in table:
            if abs(value - e.outcome) < 1e-9:
                return prob
        return 0.0
    if e.quantity == "pointer_shift":
        return moments(preselected_distribution(A, scn.pre, GaussianPointer(e.delta)))[0]
    raise ValueError(f"unknown quantity {e.quantity!r}")


def verify(scn: Scenario) -> list[Check]:
    """Recompute every expected entry of ``scn``."""
    out = []
    for e in scn.expected:
        got = _compute(scn, e)
        if e.value is None or got is None:
            ok = e.value is None and got is None
        else:
            ok = bool(np.abs(complex(got) - complex(e.value)) <= e.tol)
        out.append(Check(e, got, ok))
    return out
