import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from weakmeas.errors import TooImprobable
from weakmeas.measure import (
    MeasurementRecord,
    disturbance,
    envelope_constant,
    merge_records,
    postselection_probability,
    rejection_sample,
    run_sharded,
    sample_postselected,
    sample_preselected,
    strong_measure,
    strong_measure_counts,
    substream,
)
from weakmeas.pointer import GaussianPointer, moments, postselected_distribution
from weakmeas.qcore import (
    basis_state,
    identity,
    make_observable,
    make_state,
    op_tensor,
    pauli,
    projector,
    spin_coherent_state,
    spin_operator,
)
from weakmeas.textio import read_table
from weakmeas.tsvf import TwoStateVector, born_probability

from helpers import observable_with_spectrum, random_hermitian, random_state


def brute_force_disturbance(A, psi, delta, n_grid=20001):
    """Oracle: build the joint state on a pointer grid and trace the pointer out."""
    a = A.group_values
    lo, hi = a.min() - 12 * delta, a.max() + 12 * delta
    q = np.linspace(lo, hi, n_grid)
    dq = q[1] - q[0]
    phi = [(math.pi * delta ** 2) ** -0.25 * np.exp(-(q - ag) ** 2 / (2 * delta ** 2)) for ag in a]
    branches = [P @ psi.amplitudes for P in A.group_projectors]
    dim = A.dimension
    rho = np.zeros((dim, dim), dtype=complex)
    for g in range(len(a)):
        for h in range(len(a)):
            rho += np.outer(branches[g], branches[h].conj()) * (phi[g] @ phi[h]) * dq
    return 1.0 - float(np.real(np.vdot(psi.amplitudes, rho @ psi.amplitudes)))


@pytest.fixture
def three_box():
    return TwoStateVector(make_state([1, 1, 1]), make_state([1, 1, -1]))


class TestStreams:
    def test_same_seed_same_stream(self):
        np.testing.assert_array_equal(substream(5, 2).random(8), substream(5, 2).random(8))

    def test_tasks_are_independent(self):
        assert not np.array_equal(substream(5, 0).random(8), substream(5, 1).random(8))
        assert not np.array_equal(substream(5, 0).random(8), substream(6, 0).random(8))

    def test_uses_philox(self):
        assert isinstance(substream(0).bit_generator, np.random.Philox)


class TestStrongMeasure:
    def test_eigenstate_is_deterministic_and_unchanged(self):
        A = make_observable(np.diag([1.0, 2.0, 3.0]))
        psi = basis_state(1, 3)
        for seed in range(10):
            value, after = strong_measure(A, psi, seed)
            assert value == 2.0
            np.testing.assert_allclose(after.amplitudes, psi.amplitudes)

    def test_collapse_is_luders(self):
        A = make_observable(np.diag([1.0, 1.0, -1.0]))
        psi = make_state([1, 2j, 3])
        value, after = strong_measure(A, psi, substream(0))
        expected = make_state([1, 2j, 0]) if value == 1.0 else make_state([0, 0, 3])
        np.testing.assert_allclose(after.amplitudes, expected.amplitudes, atol=1e-15)

    def test_repeat_gives_same_outcome(self):
        rng = np.random.default_rng(0)
        A = random_hermitian(rng, 4)
        gen = substream(1)
        for _ in range(20):
            psi = random_state(rng, 4)
            v1, after = strong_measure(A, psi, gen)
            v2, _ = strong_measure(A, after, gen)
            assert v1 == v2

    def test_three_box_frequencies(self):
        n = 60000
        counts = strong_measure_counts(projector([0], 3), make_state([1, 1, 1]), n, 3)
        sigma = math.sqrt(n * (1 / 3) * (2 / 3))
        assert abs(counts[1.0] - n / 3) < 3 * sigma

    def test_singlet_frequencies(self):
        singlet = make_state([0, 1, -1, 0])
        A = op_tensor(spin_operator(0.5, [0, 0, 1]), identity(2))
        n = 40000
        counts = strong_measure_counts(A, singlet, n, 4)
        sigma = math.sqrt(n * 0.25)
        assert abs(counts[0.5] - n / 2) < 3 * sigma
        assert counts[0.5] + counts[-0.5] == n

    def test_sequential_frequencies_match_born(self):
        rng = np.random.default_rng(7)
        A = observable_with_spectrum(rng, [-1.0, 0.0, 2.0])
        psi = random_state(rng, 3)
        gen = substream(7)
        n = 20000
        values = np.array([strong_measure(A, psi, gen)[0] for _ in range(n)])
        for value, prob in born_probability(A, psi):
            freq = np.mean(values == value)
            assert abs(freq - prob) < 4 * math.sqrt(prob * (1 - prob) / n) + 1e-12


class TestPreselectedSampling:
    def test_reproducible(self):
        A = pauli("z")
        psi = make_state([1, 1j])
        r1 = sample_preselected(A, psi, GaussianPointer(0.5), 1000, 42)
        r2 = sample_preselected(A, psi, GaussianPointer(0.5), 1000, 42)
        assert r1.readings.tobytes() == r2.readings.tobytes()
        assert r1.seed == 42
        assert not np.array_equal(r1.readings, sample_preselected(A, psi, GaussianPointer(0.5), 1000, 43).readings)

    def test_random_triples(self):
        rng = np.random.default_rng(20)
        n = 10 ** 6
        for k in range(20):
            dim = int(rng.integers(2, 5))
            A = random_hermitian(rng, dim, scale=2.0)
            psi = random_state(rng, dim)
            delta = float(10 ** rng.uniform(-1, 2))
            rec = sample_preselected(A, psi, GaussianPointer(delta), n, substream(20, k))
            assert abs(rec.mean() - A.expectation(psi)) < 4 * rec.standard_error()

    def test_ks_against_mixture(self):
        A = make_observable(np.diag([-1.0, 0.0, 2.0]))
        psi = make_state([1, 1, 1])
        delta = 0.8
        rec = sample_preselected(A, psi, GaussianPointer(delta), 20000, 9)
        sd = delta / math.sqrt(2)
        cdf = lambda x: sum(stats.norm.cdf(x, loc=a, scale=sd) for a in (-1.0, 0.0, 2.0)) / 3
        assert stats.kstest(rec.readings, cdf).pvalue > 1e-3

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample_preselected(pauli("z"), make_state([1, 0]), GaussianPointer(1.0), 0, 0)


class TestPostselectedSampling:
    @pytest.mark.parametrize("mode", ["physical", "direct"])
    def test_ks_three_box(self, three_box, mode):
        pc = projector([2], 3)
        ptr = GaussianPointer(20.0)
        rec = sample_postselected(pc, three_box, ptr, 20000, 5, mode=mode)
        dist = postselected_distribution(pc, three_box, ptr)
        assert stats.kstest(rec.readings, dist.cdf).pvalue > 1e-3
        assert abs(rec.mean() - moments(dist)[0]) < 4 * rec.standard_error()

    @pytest.mark.parametrize("mode", ["physical", "direct"])
    def test_reproducible(self, three_box, mode):
        args = (projector([2], 3), three_box, GaussianPointer(3.0), 5000)
        r1 = sample_postselected(*args, 11, mode=mode)
        r2 = sample_postselected(*args, 11, mode=mode)
        assert r1.readings.tobytes() == r2.readings.tobytes()
        assert r1.attempted_count == r2.attempted_count

    def test_physical_acceptance_rate(self, three_box):
        ptr = GaussianPointer(2.0)
        pc = projector([2], 3)
        rec = sample_postselected(pc, three_box, ptr, 20000, 6, mode="physical")
        p = postselection_probability(pc, three_box, ptr)
        assert abs(rec.acceptance_rate - p) < 4 * math.sqrt(p * (1 - p) / rec.attempted_count)

    def test_eigenstate_selection_always_accepted(self):
        A = make_observable(np.diag([1.0, -1.0]))
        psi = basis_state(0, 2)
        rec = sample_postselected(A, TwoStateVector(psi, psi), GaussianPointer(1e3), 10000, 1)
        assert rec.acceptance_rate > 0.99

    def test_weak_limit_same_selection_rarely_rejected(self):
        rng = np.random.default_rng(21)
        A = random_hermitian(rng, 3)
        psi = random_state(rng, 3)
        amax = float(np.max(np.abs(A.group_values)))
        rec = sample_postselected(A, TwoStateVector(psi, psi), GaussianPointer(1e3 * amax), 10000, 2)
        assert rec.acceptance_rate > 0.99

    def test_orthogonal_is_too_improbable(self):
        tsv = TwoStateVector(make_state([1, 0]), make_state([0, 1]))
        with pytest.raises(TooImprobable) as info:
            sample_postselected(pauli("z"), tsv, GaussianPointer(1.0), 10, 0)
        assert info.value.probability < 1e-12

    def test_attempt_budget(self):
        j = 8
        tsv = TwoStateVector(spin_coherent_state(j, [1, 0, 0]), spin_coherent_state(j, [0, 1, 0]))
        sxi = spin_operator(j, [1 / math.sqrt(2), 1 / math.sqrt(2), 0])
        with pytest.raises(TooImprobable):
            sample_postselected(sxi, tsv, GaussianPointer(8.0), 10 ** 5, 0, mode="physical")

    def test_direct_handles_rare_selection(self):
        j = 4.0
        tsv = TwoStateVector(spin_coherent_state(j, [1, 0, 0]), spin_coherent_state(j, [0, 1, 0]))
        sxi = spin_operator(j, [1 / math.sqrt(2), 1 / math.sqrt(2), 0])
        ptr = GaussianPointer(8.0)
        rec = sample_postselected(sxi, tsv, ptr, 20000, 3, mode="direct")
        dist = postselected_distribution(sxi, tsv, ptr)
        assert stats.kstest(rec.readings, dist.cdf).pvalue > 1e-3

    def test_unknown_mode(self, three_box):
        with pytest.raises(ValueError):
            sample_postselected(projector([2], 3), three_box, GaussianPointer(1.0), 10, 0, mode="magic")


class TestRejection:
    def test_envelope_bounds_density(self, three_box):
        for delta in (0.3, 2.0, 20.0):
            dist = postselected_distribution(projector([2], 3), three_box, GaussianPointer(delta))
            c = envelope_constant(dist)
            assert c >= 1.0
            w = np.abs(dist.coefficients) ** 2
            assert c <= len(w) * w.sum() / dist.normalization + 1e-12

    def test_attempts_counted(self, three_box):
        dist = postselected_distribution(projector([2], 3), three_box, GaussianPointer(1.0))
        readings, attempts = rejection_sample(dist, 1000, substream(0))
        assert len(readings) == 1000 and attempts >= 1000

    def test_momentum_not_supported(self, three_box):
        dist = postselected_distribution(projector([2], 3), three_box, GaussianPointer(1.0), "momentum")
        with pytest.raises(ValueError):
            rejection_sample(dist, 10, substream(0))


class TestProbabilities:
    def test_three_box(self, three_box):
        assert postselection_probability(None, three_box) == pytest.approx(1 / 9, abs=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 5, 10])
    def test_spin_bisector(self, n):
        j = n
        tsv = TwoStateVector(spin_coherent_state(j, [1, 0, 0]), spin_coherent_state(j, [0, 1, 0]))
        assert postselection_probability(None, tsv) * 4 ** n == pytest.approx(1, rel=1e-10)

    def test_pointer_converges_to_bare(self, three_box):
        pc = projector([2], 3)
        values = [postselection_probability(pc, three_box, GaussianPointer(d)) for d in (0.5, 2, 10, 100, 1e4)]
        gaps = [abs(v - 1 / 9) for v in values]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-8

    def test_strong_limit_is_sum_of_branches(self, three_box):
        pc = projector([2], 3)
        # orthogonal pointer branches: |beta_0|^2 + |beta_1|^2 = 4/9 + 1/9
        assert postselection_probability(pc, three_box, GaussianPointer(1e-3)) == pytest.approx(5 / 9, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 50.0))
    def test_is_a_probability(self, seed, delta):
        rng = np.random.default_rng(seed)
        A = random_hermitian(rng, 3)
        tsv = TwoStateVector(random_state(rng, 3), random_state(rng, 3))
        p = postselection_probability(A, tsv, GaussianPointer(delta))
        assert -1e-15 <= p <= 1.0


class TestDisturbance:
    def test_against_partial_trace(self):
        rng = np.random.default_rng(30)
        for delta in (0.2, 1.0, 4.0):
            A = observable_with_spectrum(rng, [-1.0, 0.5, 1.0, 1.0])
            psi = random_state(rng, 4)
            expected = brute_force_disturbance(A, psi, delta)
            assert disturbance(A, psi, GaussianPointer(delta)) == pytest.approx(expected, abs=1e-9)

    def test_monotone_and_weak_limit(self):
        rng = np.random.default_rng(31)
        A = random_hermitian(rng, 3, scale=2.0)
        psi = random_state(rng, 3)
        spread = float(np.ptp(A.group_values))
        d = [disturbance(A, psi, GaussianPointer(x * spread)) for x in (0.1, 1, 10, 100)]
        assert all(b < a for a, b in zip(d, d[1:]))
        assert d[-1] < 1e-4

    def test_strong_limit(self):
        rng = np.random.default_rng(32)
        A = random_hermitian(rng, 3)
        psi = random_state(rng, 3)
        w = A.group_weights(psi)
        assert disturbance(A, psi, GaussianPointer(1e-6)) == pytest.approx(1 - w @ w, abs=1e-12)

    def test_eigenstate_undisturbed(self):
        A = make_observable(np.diag([1.0, 2.0]))
        assert disturbance(A, basis_state(0, 2), GaussianPointer(0.01)) == pytest.approx(0, abs=1e-15)


class TestRecords:
    def test_invariants(self):
        with pytest.raises(ValueError):
            MeasurementRecord(np.zeros(3), 2, 5)
        with pytest.raises(ValueError):
            MeasurementRecord(np.zeros(3), 3, 2)

    def test_to_text(self):
        rec = MeasurementRecord(np.array([0.1, -2.5]), 2, 7, seed=3)
        meta, header, rows = read_table(rec.to_text({"mode": "physical"}))
        assert header == ["reading"]
        assert meta["seed"] == "3" and meta["attempted_count"] == "7" and meta["mode"] == "physical"
        assert [r[0] for r in rows] == [0.1, -2.5]

    def test_merge(self):
        a = MeasurementRecord(np.array([1.0]), 1, 2)
        b = MeasurementRecord(np.array([2.0, 3.0]), 2, 2)
        m = merge_records([a, b], seed=4)
        np.testing.assert_array_equal(m.readings, [1, 2, 3])
        assert m.attempted_count == 4 and m.acceptance_rate == 0.75

    def test_sharded_is_deterministic(self, three_box):
        pc = projector([2], 3)
        ptr = GaussianPointer(5.0)

        def sampler(count, rng):
            return sample_postselected(pc, three_box, ptr, count, rng)

        serial = run_sharded(sampler, 10001, seed=8, shards=4, max_workers=1)
        pooled = run_sharded(sampler, 10001, seed=8, shards=4, max_workers=4)
        assert serial.readings.tobytes() == pooled.readings.tobytes()
        assert serial.attempted_count == pooled.attempted_count
        assert len(serial.readings) == 10001

    def test_sharded_rejects_zero(self):
        with pytest.raises(ValueError):
            run_sharded(lambda c, r: None, 10, 0, shards=0)
