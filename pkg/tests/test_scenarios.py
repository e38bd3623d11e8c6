import json
import math

import numpy as np
import pytest

from weakmeas.errors import DimensionMismatch, InvalidSpin
from weakmeas.qcore import make_state, pauli, spin_coherent_state
from weakmeas.scenarios import (
    MAX_SPIN,
    REGISTRY,
    Expected,
    epr_singlet,
    expectation_demo,
    get_scenario,
    spin_bisector,
    three_box,
    verify,
)
from weakmeas.tsvf import (
    abl_probability,
    coarse_grained_abl,
    redhead_element_of_reality,
    weak_value,
)
from weakmeas.qcore import make_observable

from helpers import random_hermitian, random_state


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_registered_scenarios_verify(name):
    checks = verify(get_scenario(name))
    assert checks
    failed = [(c.expected.quantity, c.expected.label, c.computed) for c in checks if not c.passed]
    assert not failed


@pytest.mark.parametrize("n", range(1, MAX_SPIN + 1))
def test_spin_bisector_verifies(n):
    scn = spin_bisector(n)
    assert scn.dimension == 2 * n + 1
    assert all(c.passed for c in verify(scn))
    wv = weak_value(scn.observable("S_xi"), scn.tsv).value
    assert wv.real / n == pytest.approx(math.sqrt(2), abs=1e-9)
    assert abs(wv.imag) < 1e-9


@pytest.mark.parametrize("bad", [0, -1, MAX_SPIN + 1, 2.5, True])
def test_spin_bisector_rejects(bad):
    with pytest.raises(InvalidSpin):
        spin_bisector(bad)


def test_spin_probability_matches_product_overlap():
    # independent oracle: the j = N coherent state is the symmetric part of 2N spin-1/2 copies
    for n in range(1, 7):
        up_x = make_state([1, 1]).amplitudes
        up_y = make_state([1, 1j]).amplitudes
        overlap = abs(np.vdot(up_y, up_x)) ** (2 * n)
        scn = spin_bisector(n)
        assert abs(scn.tsv.overlap) ** 2 == pytest.approx(overlap ** 2, abs=1e-12)
        assert overlap ** 2 == pytest.approx(4.0 ** -n, rel=1e-12)


def test_spin_discrepancy_recorded():
    disc = spin_bisector(3).discrepancies
    assert len(disc) == 1
    assert disc[0].stated.startswith("2^-3")
    assert disc[0].computed == pytest.approx(4.0 ** -3)


def test_three_box_shape():
    scn = three_box()
    assert scn.labels == ["Pi_A", "Pi_B", "Pi_C", "Pi_A+Pi_B", "Pi_A+Pi_B+Pi_C", "Pi_A*Pi_B"]
    assert scn.default_observable == "Pi_C"
    assert {e.provenance for e in scn.expected} <= {"LITERATURE", "COMPUTED", "IDENTITY"}


def test_three_box_combined_box_readings():
    scn = three_box()
    combined = scn.observable("Pi_A+Pi_B")
    table = dict(abl_probability(combined, scn.tsv))
    assert table[1.0] == pytest.approx(0.8, abs=1e-12)
    # A/B/C resolved separately, then merged into "A or B"
    boxes = make_observable(np.diag([1.0, 2.0, 3.0]))
    merged = dict(coarse_grained_abl(combined, boxes, scn.tsv))
    assert merged[1.0] == pytest.approx(2 / 3, abs=1e-12)
    assert [d.stated for d in scn.discrepancies] == ["2/3"]


def test_epr_no_local_reality():
    scn = epr_singlet()
    assert scn.post is None and scn.tsv.preselected_only
    assert redhead_element_of_reality(scn.observable("sigma_z(x)I"), scn.pre) is None
    assert redhead_element_of_reality(scn.observable("sigma_z(x)sigma_z"), scn.pre) == pytest.approx(-1)


def test_expectation_demo_random():
    rng = np.random.default_rng(40)
    for k in range(5):
        A = random_hermitian(rng, 3)
        psi = random_state(rng, 3)
        scn = expectation_demo(psi, A, delta=float(10 ** rng.uniform(-1, 1.5)))
        assert all(c.passed for c in verify(scn))


def test_expectation_demo_dimension():
    with pytest.raises(DimensionMismatch):
        expectation_demo(make_state([1, 0, 0]), pauli("z"))


def test_get_scenario_forms():
    assert get_scenario("spin-bisector-5").name == "spin-bisector-5"
    assert get_scenario("spin-bisector", spin=3).dimension == 7
    with pytest.raises(KeyError):
        get_scenario("four-box")


def test_unknown_observable():
    with pytest.raises(KeyError, match="Pi_D"):
        three_box().observable("Pi_D")


def test_provenance_tag_checked():
    with pytest.raises(ValueError):
        Expected("weak_value", 1.0, "FOLKLORE")


def test_json_round_trip():
    data = json.loads(three_box().to_json())
    assert data["name"] == "three-box" and data["dimension"] == 3
    weak = {e["observable"]: e["value"]["real"] for e in data["expected"] if e["quantity"] == "weak_value"}
    assert weak["Pi_C"] == -1
    assert data["discrepancies"][0]["computed"] == pytest.approx(0.8)
    assert json.loads(epr_singlet().to_json())["post"] is None


def test_scenarios_are_immutable():
    scn = three_box()
    with pytest.raises(Exception):
        scn.name = "other"
    with pytest.raises(ValueError):
        scn.pre.amplitudes[0] = 0
    np.testing.assert_allclose(spin_coherent_state(1, [1, 0, 0]).amplitudes,
                               spin_bisector(1).pre.amplitudes)
