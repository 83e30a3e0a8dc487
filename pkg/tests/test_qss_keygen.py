import dataclasses
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from qpsi.logic.channel import AdversaryKind, AdversaryStrategy, QuantumChannel
from qpsi.logic.errors import AbortDishonestTP, AbortEavesdropping, ConfigError, InsufficientKeyBits
from qpsi.logic.qss_keygen import (
    KeygenConfig,
    KeygenRound,
    SharedKeyMaterial,
    TPKeyView,
    count_test_rounds,
    default_delta,
    key_shortfall_probability,
    prepare_psi,
    rejection_probability,
    rounds_for_rejection,
    run_keygen,
    sample_rounds,
    verify_table1,
)
from qpsi.logic.statevector import Basis, StateVector, measurement_distribution, reduced_density


def measured_round(alice_basis, bob_basis, tp, alice, bob):
    return KeygenRound(0, alice_basis, bob_basis, tp_outcome=tp, alice_outcome=alice, bob_outcome=bob)


class TestPsi:
    def test_amplitudes(self):
        amps = prepare_psi().amplitudes
        expected = np.zeros(8)
        expected[[0b000, 0b011, 0b101, 0b110]] = 0.5
        assert np.max(np.abs(amps - expected)) < 1e-12

    def test_every_qubit_is_maximally_mixed(self):
        psi = prepare_psi()
        for wire in range(3):
            rho = reduced_density(psi, [wire]).entries
            assert np.max(np.abs(rho - np.eye(2) / 2)) < 1e-12

    def test_x_outcomes_of_alice_and_bob_agree(self):
        dist = measurement_distribution(prepare_psi(), [1, 2], Basis.X)
        assert dist == pytest.approx({"00": 0.5, "11": 0.5})


class TestCorrelationCheck:
    @pytest.mark.parametrize(
        "tp, alice, bob, ok",
        [(0, 0, 0, True), (0, 1, 1, True), (1, 1, 0, True), (1, 1, 1, False), (0, 1, 0, False)],
    )
    def test_z_rounds(self, tp, alice, bob, ok):
        assert verify_table1(measured_round(Basis.Z, Basis.Z, tp, alice, bob)) is ok

    @pytest.mark.parametrize(
        "tp, alice, bob, ok",
        [(0, 0, 0, True), (1, 1, 1, True), (1, 0, 0, True), (0, 0, 1, False)],
    )
    def test_x_rounds_ignore_tp_outcome(self, tp, alice, bob, ok):
        assert verify_table1(measured_round(Basis.X, Basis.X, tp, alice, bob)) is ok

    def test_mixed_basis_round_is_not_checkable(self):
        with pytest.raises(ValueError):
            verify_table1(measured_round(Basis.Z, Basis.X, 0, 0, 0))

    def test_unmeasured_round(self):
        with pytest.raises(ValueError):
            verify_table1(KeygenRound(3, Basis.Z, Basis.Z))

    def test_honest_samples_never_violate(self, rng):
        rounds = sample_rounds(512, rng)
        assert all(verify_table1(r) for r in rounds if r.same_basis)

    @pytest.mark.parametrize("basis", [Basis.Z, Basis.X])
    def test_marginals_are_uniform(self, basis):
        rounds = sample_rounds(2048, np.random.default_rng(7), alice_basis=basis, bob_basis=basis)
        for party in ("tp", "alice", "bob"):
            ones = sum(getattr(r, f"{party}_outcome") for r in rounds)
            assert stats.chisquare([2048 - ones, ones]).pvalue >= 0.001


class TestRoundBudget:
    def test_default_delta_meets_shortfall_bound(self):
        for q in (5, 7, 11):
            delta = default_delta(q)
            assert key_shortfall_probability(q, delta) < 1e-9
            assert key_shortfall_probability(q, delta - 1) >= 1e-9

    def test_config_fills_in_delta(self):
        config = KeygenConfig(5)
        assert config.delta == default_delta(5)
        assert config.rounds == 20 + config.delta
        assert config.test_rounds == count_test_rounds(config.rounds, Fraction(1, 8))

    def test_test_round_count_rounds_up(self):
        assert count_test_rounds(20, Fraction(1, 8)) == 3
        assert count_test_rounds(16, Fraction(1, 8)) == 2

    @pytest.mark.parametrize(
        "kwargs",
        [{"q": 0}, {"q": 5, "delta": -1}, {"q": 5, "test_fraction": 0}, {"q": 5, "error_threshold": 1}],
    )
    def test_invalid_config(self, kwargs):
        with pytest.raises(ConfigError):
            KeygenConfig(**kwargs)


class TestRejection:
    def test_zero_threshold_has_closed_form(self):
        rounds = 200
        t = count_test_rounds(rounds, Fraction(1, 8))
        expected = 1 - (1 - 0.1 / 2) ** t
        assert rejection_probability(0.1, rounds) == pytest.approx(expected, rel=1e-9)

    def test_honest_state_is_never_rejected(self):
        assert rejection_probability(0.0, 100) == 0

    def test_rounds_for_rejection_is_minimal(self):
        n = rounds_for_rejection(0.1)
        assert rejection_probability(0.1, n) >= 1 - 1e-6
        assert rejection_probability(0.1, n - 1) < 1 - 1e-6

    def test_threshold_above_violation_rate(self):
        with pytest.raises(ValueError):
            rounds_for_rejection(0.1, threshold=Fraction(1, 5))


class TestRunKeygen:
    def test_honest_run_satisfies_xor_relation(self, rng):
        config = KeygenConfig(5)
        channel = QuantumChannel()
        material, report = run_keygen(config, channel, rng)
        assert len(material) == 20
        assert all(int(a) ^ int(b) == int(t) for a, b, t in zip(material.r_A, material.r_B, material.r_T))
        assert report.violations == 0
        assert report.comparable_tests > 0
        assert report.key_bits == 20
        assert [r.decoys_wrong for r in report.channel_reports] == [0, 0]
        assert [r.link for r in report.channel_reports] == ["TP->Alice", "TP->Bob"]

    def test_substituted_state_is_caught(self, rng):
        config = KeygenConfig(5, delta=200, test_fraction=Fraction(1, 2))
        with pytest.raises(AbortDishonestTP) as excinfo:
            run_keygen(config, QuantumChannel(), rng, tp_state=StateVector.zero(3))
        assert excinfo.value.phase == "keygen"
        assert excinfo.value.report["violations"] > 0
        assert excinfo.value.report["cases"]["ZZ"]["violations"] == 0

    def test_disturbed_key_rounds_abort_under_loose_thresholds(self, rng):
        config = KeygenConfig(
            5, delta=200, test_fraction=Fraction(1, 4), error_threshold=Fraction(9, 10)
        )
        channel = QuantumChannel(
            AdversaryStrategy(AdversaryKind.INTERCEPT_RESEND), threshold=Fraction(9, 10)
        )
        with pytest.raises(AbortEavesdropping) as excinfo:
            run_keygen(config, channel, rng)
        assert excinfo.value.phase == "keygen"
        assert excinfo.value.report["key_parity_errors"] > 0
        assert excinfo.value.report["key_bits"] == 0

    def test_honest_run_has_no_parity_errors(self, rng):
        _, report = run_keygen(KeygenConfig(5), QuantumChannel(), rng)
        assert report.key_parity_errors == 0
        assert report.to_dict()["key_parity_errors"] == 0

    def test_too_few_rounds(self, rng):
        config = KeygenConfig(5, delta=8, test_fraction=Fraction(1, 2))
        with pytest.raises(InsufficientKeyBits):
            run_keygen(config, QuantumChannel(), rng)

    def test_tp_state_must_have_three_qubits(self, rng):
        with pytest.raises(ValueError):
            run_keygen(KeygenConfig(5), QuantumChannel(), rng, tp_state=StateVector.zero(2))


class TestKeyViews:
    def test_tp_view_only_holds_xor(self):
        material = SharedKeyMaterial.from_pads("1100", "1010")
        assert material.r_T == "0110"
        assert [f.name for f in dataclasses.fields(TPKeyView)] == ["r_T"]
        assert material.tp_view().xor_pairs(2)[1].alpha == 1

    def test_xor_relation_is_enforced(self):
        with pytest.raises(ValueError):
            SharedKeyMaterial("11", "00", "10")

    def test_owner_pauli_keys_split_x_and_z_halves(self):
        view = SharedKeyMaterial.from_pads("10" + "01", "00" + "00").owner_view("A")
        keys = view.pauli_keys(1)
        assert [(k.a, k.b) for k in keys] == [(1, 0), (0, 1)]
        with pytest.raises(ValueError):
            SharedKeyMaterial.from_pads("0", "0").owner_view("TP")
