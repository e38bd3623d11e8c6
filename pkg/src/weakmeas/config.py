"""Central numerical tolerances and limits."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    norm: float = 1e-12
    hermitian: float = 1e-10
    reconstruction: float = 1e-9
    orthonormal: float = 1e-10
    degeneracy: float = 1e-10
    axis_norm: float = 1e-10
    coherent_residual: float = 1e-9
    # |<post|pre>| at or below this refuses a weak value
    orthogonal_guard: float = 1e-10
    # ABL denominator at or below this means incompatible selections
    abl_denominator: float = 1e-20
    certainty: float = 1e-9
    rule_equality: float = 1e-10
    strong_weak: float = 1e-8
    zero_postselection: float = 1e-300
    # composite Simpson refinement
    quad_start_exponent: int = 11
    quad_cap_exponent: int = 18
    quad_rtol: float = 1e-10
    quad_fail_rtol: float = 1e-8
    quad_span: float = 10.0
    # sampling
    too_improbable: float = 1e-12
    attempt_cap: int = 10**8
    envelope_inflation: float = 1.05


DEFAULTS = Tolerances()
