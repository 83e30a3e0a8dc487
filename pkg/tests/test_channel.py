from fractions import Fraction

import pytest

from qpsi.logic.channel import (
    DECOY_LABELS,
    AdversaryKind,
    AdversaryStrategy,
    ChannelReport,
    DecoySpec,
    Eavesdropper,
    QuantumChannel,
    QuantumMemory,
    Slot,
    ancilla_information_gain,
    build_message,
    entangle_measure_detection_probability,
    insert_decoys,
    intercept_resend_detection_probability,
    transmit,
    verify_decoys,
)
from qpsi.logic.errors import AbortEavesdropping, ConfigError
from qpsi.logic.statevector import Basis, StateVector

INTERCEPT = AdversaryStrategy(AdversaryKind.INTERCEPT_RESEND)


def payload_in_memory(count):
    memory = QuantumMemory()
    slots = [Slot(memory.allocate(StateVector.zero(1)), 0) for _ in range(count)]
    return memory, slots


class TestQuantumMemory:
    def test_merge_returns_offset(self):
        memory = QuantumMemory()
        first = memory.allocate(StateVector.from_bits("10"), ["a0", "a1"])
        second = memory.allocate(StateVector.from_bits("1"), ["b0"])
        assert memory.merge(first, second) == 2
        assert second not in memory
        assert memory.state(first).basis_bits() == "101"
        assert memory.labels(first) == ("a0", "a1", "b0")

    def test_append_wire_keeps_existing_indices(self):
        memory = QuantumMemory()
        register = memory.allocate(StateVector.from_bits("1"))
        assert memory.append_wire(register, StateVector.zero(1)) == 1
        assert memory.state(register).basis_bits() == "10"

    def test_replace_checks_size(self):
        memory = QuantumMemory()
        register = memory.allocate(StateVector.zero(1))
        with pytest.raises(ValueError):
            memory.replace(register, StateVector.zero(2))


class TestDecoys:
    def test_plan_is_sorted_and_unique(self, rng):
        plan = insert_decoys(10, 6, rng)
        positions = [decoy.position for decoy in plan]
        assert positions == sorted(set(positions))
        assert all(0 <= p < 16 for p in positions)
        assert all(decoy.label in DECOY_LABELS for decoy in plan)

    def test_message_interleaves_payload_in_order(self, rng):
        memory, payload = payload_in_memory(3)
        msg = build_message(memory, payload, [DecoySpec(1, "+")])
        assert len(msg) == 4
        assert msg.payload_slots() == payload

    def test_identity_channel_never_flags_decoys(self, rng):
        memory, payload = payload_in_memory(8)
        plan = insert_decoys(8, 8, rng)
        msg = transmit(build_message(memory, payload, plan), None, rng)
        report, delivered = verify_decoys(msg, plan, rng)
        assert (report.decoys_tested, report.decoys_wrong) == (8, 0)
        assert delivered.slots == payload
        assert len(memory) == 8

    def test_plan_must_match_message(self, rng):
        memory, payload = payload_in_memory(2)
        msg = build_message(memory, payload, [DecoySpec(0, "0")])
        with pytest.raises(ValueError):
            verify_decoys(msg, [DecoySpec(1, "0")], rng)

    def test_error_rate_needs_tested_decoys(self):
        with pytest.raises(ValueError):
            ChannelReport().error_rate
        assert ChannelReport(4, 1).error_rate == Fraction(1, 4)


class TestQuantumChannel:
    def test_zero_decoys_is_a_config_error(self):
        with pytest.raises(ConfigError):
            QuantumChannel(decoys_per_message=0)

    def test_honest_send_defaults_to_one_decoy_per_payload_qubit(self, rng):
        memory, payload = payload_in_memory(6)
        channel = QuantumChannel()
        slots, report = channel.send(memory, payload, rng, "A", "TP", phase="encryption")
        assert slots == payload
        assert report.decoys_tested == 6
        assert report.decoys_wrong == 0
        assert report.link == "A->TP"
        assert channel.reports == [report]

    def test_intercept_resend_aborts(self, rng):
        memory, payload = payload_in_memory(64)
        channel = QuantumChannel(INTERCEPT)
        with pytest.raises(AbortEavesdropping) as excinfo:
            channel.send(memory, payload, rng, "A", "TP", phase="encryption")
        assert excinfo.value.phase == "encryption"
        assert channel.reports[0].decoys_wrong > 0

    def test_error_free_entangling_attack_passes(self, rng):
        memory, payload = payload_in_memory(16)
        strategy = AdversaryStrategy(AdversaryKind.ENTANGLE_MEASURE, (1, 1))
        channel = QuantumChannel(strategy)
        _, report = channel.send(memory, payload, rng, "B", "TP")
        assert report.decoys_wrong == 0
        assert len(channel.eavesdropper.live_ancillas(memory)) == 16


class TestAdversaryStrategy:
    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            AdversaryStrategy.from_name("bogus")

    def test_truth_table_must_be_bits(self):
        with pytest.raises(ConfigError):
            AdversaryStrategy(AdversaryKind.ENTANGLE_MEASURE, (2, 0))

    def test_entangling_attack_appends_ancilla(self, rng):
        memory = QuantumMemory()
        register = memory.allocate(StateVector.from_bits("1"))
        eve = Eavesdropper(AdversaryStrategy(AdversaryKind.ENTANGLE_MEASURE, (0, 1)))
        eve.attack(memory, Slot(register, 0), rng)
        assert memory.state(register).basis_bits() == "11"
        assert eve.ancillas == [Slot(register, 1)]

    def test_live_ancillas_are_scoped_to_their_memory(self, rng):
        eve = Eavesdropper(AdversaryStrategy(AdversaryKind.ENTANGLE_MEASURE, (0, 1)))
        first, second = QuantumMemory(), QuantumMemory()
        for memory in (first, second):
            register = memory.allocate(StateVector.from_bits("1"))
            eve.attack(memory, Slot(register, 0), rng)
        assert eve.live_ancillas(second) == [Slot(0, 1)]
        assert eve.live_ancillas(first) == [Slot(0, 1)]
        first.release(0)
        assert eve.live_ancillas(first) == []
        assert eve.live_ancillas(second) == [Slot(0, 1)]
        assert len(eve.ancillas) == 2


class TestDetectionRates:
    def test_intercept_resend_exact_rate(self):
        assert intercept_resend_detection_probability() == Fraction(1, 4)

    def test_intercept_resend_fixed_basis(self):
        assert intercept_resend_detection_probability({Basis.Z: Fraction(1)}) == Fraction(1, 4)

    def test_intercept_resend_sampled_rate(self, rng):
        memory, payload = payload_in_memory(1)
        plan = insert_decoys(1, 4096, rng)
        msg = transmit(build_message(memory, payload, plan), INTERCEPT, rng)
        report, _ = verify_decoys(msg, plan, rng)
        assert 0.21 <= float(report.error_rate) <= 0.29

    @pytest.mark.parametrize("f", [(0, 0), (1, 1)])
    def test_constant_f_is_undetectable_and_learns_nothing(self, f):
        assert entangle_measure_detection_probability(f) == 0
        assert ancilla_information_gain(f) < 1e-12

    @pytest.mark.parametrize("f", [(0, 1), (1, 0)])
    def test_balanced_f_disturbs_x_basis_decoys(self, f):
        assert entangle_measure_detection_probability(f, ("+", "-")) == Fraction(1, 2)
        assert entangle_measure_detection_probability(f, ("0", "1")) == 0
        assert entangle_measure_detection_probability(f) == Fraction(1, 4)
        assert ancilla_information_gain(f) > 0.5
