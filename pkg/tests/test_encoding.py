import math

import numpy as np
import pytest

from qpsi.logic.channel import AdversaryKind, AdversaryStrategy
from qpsi.logic.encoding import (
    BinaryMask,
    KeySource,
    KeySourceKind,
    PrivateSet,
    Side,
    check_common_modulus,
    draw_binary_mask,
    draw_multiplier,
    item_bits,
    mask_set,
    prepare_item_states,
    unmask_set,
    units_of,
)
from qpsi.logic.errors import AbortEavesdropping, ConfigError, ModulusMismatch, NonInvertibleMultiplier
from qpsi.logic.qkd import SimulatedQKD


class TestPrivateSet:
    def test_zero_is_a_valid_element(self):
        assert 0 in PrivateSet.from_values([0, 4], 5)

    def test_out_of_range(self):
        with pytest.raises(ConfigError):
            PrivateSet.from_values([1, 5], 5)

    def test_duplicates(self):
        with pytest.raises(ConfigError):
            PrivateSet.from_values([1, 1], 5)

    def test_modulus_must_be_at_least_two(self):
        with pytest.raises(ConfigError):
            PrivateSet.from_values([0], 1)

    def test_common_modulus(self):
        with pytest.raises(ModulusMismatch):
            check_common_modulus([PrivateSet.from_values([1], 5), PrivateSet.from_values([1], 7)])


class TestMasking:
    def test_two_party_worked_example(self, worked_two_party_sets):
        a, b = (mask_set(s, 2) for s in worked_two_party_sets)
        assert a.sorted() == [1, 2, 4]
        assert b.sorted() == [2, 3, 4]

    def test_identity_multiplier(self, worked_two_party_sets):
        assert mask_set(worked_two_party_sets[0], 1).elements == worked_two_party_sets[0].elements

    def test_three_party_worked_example(self, worked_three_party_sets):
        masked = [mask_set(s, 3) for s in worked_three_party_sets]
        assert [m.sorted() for m in masked] == [[1, 3, 6], [2, 6], [1, 5, 6]]

    def test_non_invertible_multiplier(self):
        with pytest.raises(NonInvertibleMultiplier):
            mask_set(PrivateSet.from_values([1, 3], 6), 2)

    def test_unmask_restores_set(self, worked_three_party_sets):
        masked = mask_set(worked_three_party_sets[0], 3)
        assert unmask_set(masked, 3).elements == worked_three_party_sets[0].elements

    def test_masking_preserves_cardinalities(self):
        rng = np.random.default_rng(11)
        for q in (5, 6, 9, 12):
            for _ in range(20):
                sets = [frozenset(int(v) for v in rng.choice(q, size=int(rng.integers(0, q + 1)), replace=False))
                        for _ in range(3)]
                for k in units_of(q):
                    masked = [mask_set(PrivateSet(s, q), k).elements for s in sets]
                    assert len(frozenset.intersection(*masked)) == len(frozenset.intersection(*sets))
                    assert len(frozenset.union(*masked)) == len(frozenset.union(*sets))


class TestKeySource:
    def test_multiplier_is_a_unit(self):
        source = KeySource(seed=3).subscribe("A1").subscribe("A2")
        for q in (5, 9, 12):
            for _ in range(50):
                assert math.gcd(draw_multiplier(source, q), q) == 1

    def test_same_seed_gives_same_material(self):
        first = KeySource(seed=5)
        second = KeySource(seed=5)
        assert draw_multiplier(first, 11) == draw_multiplier(second, 11)
        assert draw_binary_mask(first, 11) == draw_binary_mask(second, 11)
        assert first.bits_consumed == second.bits_consumed

    def test_third_party_cannot_subscribe(self):
        with pytest.raises(ValueError):
            KeySource().subscribe("TP")

    def test_mask_length_is_q(self):
        assert len(draw_binary_mask(KeySource(seed=1), 7)) == 7

    def test_bb84_source_distributes_bits(self):
        source = KeySource(KeySourceKind.BB84, seed=9)
        for party in ("A1", "A2", "A3"):
            source.subscribe(party)
        assert len(source.bits(16)) == 16
        assert [(r.sender, r.receiver) for r in source.qkd_reports] == [("A1", "A2"), ("A1", "A3")]
        assert all(r.errors == 0 for r in source.qkd_reports)

    def test_bb84_source_needs_two_subscribers(self):
        source = KeySource(KeySourceKind.BB84).subscribe("A1")
        with pytest.raises(ValueError):
            source.bits(4)


class TestSimulatedQKD:
    def test_honest_session_agrees(self, rng):
        session = SimulatedQKD(rng)
        sender_key, receiver_key = session.generate(32)
        assert sender_key == receiver_key
        assert len(sender_key) == 32
        assert session.report.errors == 0
        assert session.report.sampled > 0

    def test_intercept_resend_is_detected(self, rng):
        session = SimulatedQKD(rng, AdversaryStrategy(AdversaryKind.INTERCEPT_RESEND))
        with pytest.raises(AbortEavesdropping) as excinfo:
            session.generate(64)
        assert excinfo.value.phase == "qkd"


class TestItemStates:
    @pytest.mark.parametrize("mask_bit", [0, 1])
    @pytest.mark.parametrize("in_a, in_b", [(True, True), (False, True), (True, False), (False, False)])
    def test_xor_of_encodings_does_not_depend_on_mask(self, mask_bit, in_a, in_b):
        a = item_bits(in_a, mask_bit, Side.A)
        b = item_bits(in_b, mask_bit, Side.B)
        xor = f"{int(a[0]) ^ int(b[0])}{int(a[1]) ^ int(b[1])}"
        expected = {(True, True): "00", (False, True): "01", (True, False): "10", (False, False): "11"}
        assert xor == expected[(in_a, in_b)]

    def test_worked_example(self, worked_two_party_sets):
        a, b = (mask_set(s, 2) for s in worked_two_party_sets)
        mask = BinaryMask("00100")
        states_a = prepare_item_states(a, mask, Side.A)
        states_b = prepare_item_states(b, mask, Side.B)
        assert states_a[0].basis_bits() == "00"
        assert states_b[0].basis_bits() == "11"
        assert states_a[2].basis_bits() == "10"
        assert states_b[2].basis_bits() == "10"
        assert len(states_a) == 5

    def test_mask_length_must_match(self, worked_two_party_sets):
        with pytest.raises(ValueError):
            prepare_item_states(mask_set(worked_two_party_sets[0], 1), BinaryMask("01"), Side.A)

    def test_mask_is_binary(self):
        with pytest.raises(ValueError):
            BinaryMask("012")
