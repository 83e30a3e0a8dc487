"""
第三、四阶段及多方扩展。

数据持有方用各自的 Pauli 密钥加密两比特编码态后发给 TP；
TP 以 Alice 的线路为控制位、Bob 的线路为目标位做 CNOT，
用 r_T 中的异或密钥解密目标对并在计算基下测量，按分类规则计数。
多方时用户两两分组，各组独立运行，再逐位汇总交集与并集。
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from qpsi.logic.channel import AdversaryKind, QuantumChannel, QuantumMemory, Slot
from qpsi.logic.encoding import (
    KeySource,
    MaskedSet,
    Side,
    check_common_modulus,
    draw_binary_mask,
    draw_multiplier,
    mask_set,
    prepare_item_states,
)
from qpsi.logic.errors import ConfigError, ModulusMismatch
from qpsi.logic.pauli_qotp import decrypt, derive_tp_decryption_key, encrypt
from qpsi.logic.qss_keygen import OwnerKeyView, SharedKeyMaterial, TPKeyView, run_keygen
from qpsi.logic.resources import ResourceCounters
from qpsi.logic.statevector import Basis, apply_gates, cnot_gate, measure

THIRD_PARTY_ID = "TP"


class Role(Enum):
    DATA_OWNER = "DataOwner"
    THIRD_PARTY = "ThirdParty"


class MembershipCode(Enum):
    BOTH = "Both"
    B_ONLY = "BOnly"
    A_ONLY = "AOnly"
    NEITHER = "Neither"


CODE_BY_BITS = {
    "00": MembershipCode.BOTH,
    "01": MembershipCode.B_ONLY,
    "10": MembershipCode.A_ONLY,
    "11": MembershipCode.NEITHER,
}


def classify_outcome(bits):
    try:
        return CODE_BY_BITS[bits]
    except KeyError:
        raise ValueError(f"测量结果必须是两位比特串: {bits!r}")


def evaluate_cnot_wires(state, control_wires, target_wires):
    gates = [cnot_gate(c, t) for c, t in zip(control_wires, target_wires)]
    return apply_gates(state, gates)


def evaluate_cnot_pair(enc_a, enc_b):
    """CNOT(0->2) 与 CNOT(1->3)：Alice 的两比特为控制位，Bob 的为目标位。"""
    if enc_a.num_qubits != 2 or enc_b.num_qubits != 2:
        raise ValueError("同态计算的输入必须是两个两比特寄存器")
    return evaluate_cnot_wires(enc_a.tensor(enc_b), (0, 1), (2, 3))


@dataclass(frozen=True)
class TranscriptEvent:
    phase: str
    sender: str
    receiver: str
    kind: str
    group: int = 0
    size: int = 0
    core_qubits: int = 0
    extra_qubits: int = 0
    decoy_qubits: int = 0
    classical_bits: int = 0
    note: str = ""

    def to_dict(self):
        return asdict(self)


class Transcript:
    def __init__(self, group=0):
        self.group = group
        self.events = []

    def record(self, phase, sender, receiver, kind, **counts):
        event = TranscriptEvent(phase, sender, receiver, kind, group=self.group, **counts)
        self.events.append(event)
        return event

    def extend(self, events):
        self.events.extend(events)

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def to_list(self):
        return [e.to_dict() for e in self.events]


@dataclass
class PartyState:
    role: Role
    party_id: str
    key_material: object = None
    masked_set: MaskedSet | None = None
    side: str = ""

    def __post_init__(self):
        if self.role is Role.THIRD_PARTY:
            if self.key_material is not None and not isinstance(self.key_material, TPKeyView):
                raise ValueError("TP 只能持有 r_T 异或视图，不能持有任何用户的密钥")
            if self.masked_set is not None:
                raise ValueError("TP 不能持有用户的集合")
            return
        if isinstance(self.key_material, TPKeyView):
            raise ValueError(f"{self.party_id} 是数据持有方，不应持有 r_T")
        if isinstance(self.key_material, OwnerKeyView) and self.key_material.owner != self.side:
            raise ValueError(f"{self.party_id} 不能持有另一方的密钥")


@dataclass
class OutcomeCounts:
    h1: int | None = None
    h2: int | None = None
    h3: int | None = None
    h4: int | None = None
    h1p: int | None = None
    h2p: int | None = None

    @classmethod
    def from_codes(cls, codes):
        tally = {code: 0 for code in MembershipCode}
        for code in codes:
            tally[code] += 1
        return cls(
            tally[MembershipCode.BOTH],
            tally[MembershipCode.B_ONLY],
            tally[MembershipCode.A_ONLY],
            tally[MembershipCode.NEITHER],
        )

    @property
    def two_party(self):
        return (self.h1, self.h2, self.h3, self.h4)

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class RunOverrides:
    """测试用：固定乘法密钥、各组二进制掩码或各组的 (r_A, r_B)。"""

    multiplier: int | None = None
    masks: list | None = None
    pads: list | None = None


@dataclass
class GroupOutcome:
    index: int
    members: tuple
    codes: list
    keygen_report: object
    channel_reports: list
    transcript: Transcript
    soundness_violations: int = 0


@dataclass
class ProtocolResult:
    intersection_cardinality: int
    union_cardinality: int
    counts: OutcomeCounts
    keygen_reports: list
    channel_reports: list
    resources: ResourceCounters
    transcript: Transcript
    groups: list
    membership: list
    multiplier: int
    masked_sets: list
    masks: list
    q: int

    @property
    def party_count(self):
        return len(self.masked_sets)

    @property
    def cardinalities(self):
        return (self.intersection_cardinality, self.union_cardinality)

    def membership_rows(self):
        """逐位的分类结果，只用于导出和测试，不属于 TP 公布的内容。"""
        rows = []
        for j in range(self.q):
            row = {"j": j}
            for group, codes in zip(self.groups, self.membership):
                row["-".join(group)] = codes[j].value
            rows.append(row)
        return rows


def make_groups(parties):
    """
    两两分组。m 为偶数时不相交；m 为奇数时最后一组与前一组共享一个用户，
    共 ceil(m/2) 组，覆盖所有用户。
    """
    parties = list(parties)
    m = len(parties)
    if m < 2:
        raise ConfigError(f"至少需要 2 个参与方，实际为 {m}")
    groups = [(parties[i], parties[i + 1]) for i in range(0, m - 1, 2)]
    if m % 2:
        groups.append((parties[m - 2], parties[m - 1]))
    return groups


class ProtocolEngine:
    def __init__(self, config):
        self.config = config

    def _run_group(self, index, members, masked_pair, mask, pads, seed_seq):
        config = self.config
        q = config.q
        rng = np.random.default_rng(seed_seq)
        a_id, b_id = members
        label = f"组{index + 1}({a_id},{b_id})"
        transcript = Transcript(group=index)
        channel = QuantumChannel(config.adversary, config.decoys_per_message, config.channel_threshold)

        keygen_config = config.keygen_config()
        material, keygen_report = run_keygen(keygen_config, channel, rng, session=label)
        if pads is not None:
            material = SharedKeyMaterial.from_pads(*pads)
            if len(material) != keygen_config.key_length:
                raise ValueError(f"指定的密钥长度 {len(material)} 不等于 4q = {keygen_config.key_length}")

        tp = PartyState(Role.THIRD_PARTY, THIRD_PARTY_ID, material.tp_view())
        alice = PartyState(Role.DATA_OWNER, a_id, material.owner_view("A"), masked_pair[0], side="A")
        bob = PartyState(Role.DATA_OWNER, b_id, material.owner_view("B"), masked_pair[1], side="B")

        to_alice, to_bob = keygen_report.channel_reports
        transcript.record("keygen", THIRD_PARTY_ID, THIRD_PARTY_ID, "prepare",
                          core_qubits=3 * keygen_config.key_length, extra_qubits=3 * keygen_config.delta,
                          note="|Psi>")
        for owner, report in ((a_id, to_alice), (b_id, to_bob)):
            transcript.record("keygen", THIRD_PARTY_ID, owner, "quantum",
                              size=keygen_config.rounds + report.decoys_tested,
                              decoy_qubits=report.decoys_tested)
            transcript.record("keygen", owner, "all", "classical",
                              classical_bits=keygen_config.rounds, note="公布测量基")

        memory = QuantumMemory()
        registers = {}
        plaintext = {}
        for owner, side in ((alice, Side.A), (bob, Side.B)):
            pairs = owner.key_material.x_pairs(q)
            items = prepare_item_states(owner.masked_set, mask, side)
            plaintext[side] = [item.basis_bits() for item in items]
            regs = []
            for j, item in enumerate(items):
                state = encrypt(item, pairs[j].as_pauli_keys(), [0, 1])
                regs.append(memory.allocate(state, [f"{owner.party_id}:{j}:0", f"{owner.party_id}:{j}:1"]))
            registers[side] = regs
            transcript.record("encoding", owner.party_id, owner.party_id, "prepare",
                              core_qubits=2 * q, note="加密编码态")

        evaluation_reports = []
        for owner, side in ((alice, Side.A), (bob, Side.B)):
            slots = [Slot(r, w) for r in registers[side] for w in (0, 1)]
            _, report = channel.send(memory, slots, rng, owner.party_id, THIRD_PARTY_ID, "evaluation")
            evaluation_reports.append(report)
            transcript.record("evaluation", owner.party_id, THIRD_PARTY_ID, "quantum",
                              size=2 * q + report.decoys_tested, decoy_qubits=report.decoys_tested)

        xor_pairs = tp.key_material.xor_pairs(q)
        codes = []
        violations = 0
        for j in range(q):
            register = registers[Side.A][j]
            offset = memory.merge(register, registers[Side.B][j])
            target = (offset, offset + 1)
            state = evaluate_cnot_wires(memory.state(register), (0, 1), target)
            sk = derive_tp_decryption_key(xor_pairs[j].alpha, xor_pairs[j].beta)
            state = decrypt(state, sk, target)
            bits, _ = measure(state, list(target), Basis.Z, rng)
            memory.release(register)
            codes.append(classify_outcome(bits))

            expected = "".join(
                str(int(a) ^ int(b)) for a, b in zip(plaintext[Side.A][j], plaintext[Side.B][j])
            )
            if bits != expected:
                violations += 1

        if violations:
            logging.warning(f"{label} 有 {violations} 个位置的解密结果与明文异或不一致")
            if config.adversary.kind is AdversaryKind.NONE:
                raise RuntimeError(f"{label} 诚实运行中逐项解密结果出错，共 {violations} 处")

        return GroupOutcome(
            index=index,
            members=members,
            codes=codes,
            keygen_report=keygen_report,
            channel_reports=list(keygen_report.channel_reports) + evaluation_reports,
            transcript=transcript,
            soundness_violations=violations,
        )

    def _run(self, sets, rng, overrides=None):
        config = self.config
        overrides = overrides or RunOverrides()
        q = check_common_modulus(sets)
        if q != config.q:
            raise ModulusMismatch([q, config.q])
        party_ids = [f"A{i + 1}" for i in range(len(sets))]
        groups = make_groups(party_ids)

        root = np.random.SeedSequence(int(rng.integers(0, 2**63)))
        key_seq, *group_seqs = root.spawn(len(groups) + 1)
        source = KeySource(
            config.key_source,
            seed=int(key_seq.generate_state(1)[0]),
            adversary=config.adversary,
            threshold=config.channel_threshold,
        )
        for party in party_ids:
            source.subscribe(party)

        k = overrides.multiplier or config.multiplier or draw_multiplier(source, q)
        masked = [mask_set(s, k) for s in sets]
        masks = overrides.masks or [draw_binary_mask(source, q) for _ in groups]
        if len(masks) != len(groups) or any(len(mask) != q for mask in masks):
            raise ValueError(f"需要 {len(groups)} 个长度为 {q} 的二进制掩码")
        pads = overrides.pads or [None] * len(groups)
        if len(pads) != len(groups):
            raise ValueError(f"需要 {len(groups)} 组 (r_A, r_B)")

        index_of = {party: i for i, party in enumerate(party_ids)}
        tasks = [
            (g, members, (masked[index_of[members[0]]], masked[index_of[members[1]]]), masks[g], pads[g], group_seqs[g])
            for g, members in enumerate(groups)
        ]
        logging.info(f"协议开始: q={q}, m={len(sets)}, 共 {len(groups)} 组")
        if config.parallel > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=min(config.parallel, len(tasks))) as pool:
                outcomes = list(pool.map(lambda task: self._run_group(*task), tasks))
        else:
            outcomes = [self._run_group(*task) for task in tasks]

        transcript = Transcript()
        for outcome in outcomes:
            transcript.extend(outcome.transcript)
        transcript.record("result", THIRD_PARTY_ID, "all", "output", classical_bits=2,
                          note="公布交集与并集基数")

        counts = OutcomeCounts()
        membership = [o.codes for o in outcomes]
        if len(sets) == 2:
            counts = OutcomeCounts.from_codes(membership[0])
        counts.h1p = sum(
            all(codes[j] is MembershipCode.BOTH for codes in membership) for j in range(q)
        )
        counts.h2p = sum(
            any(codes[j] is not MembershipCode.NEITHER for codes in membership) for j in range(q)
        )

        return ProtocolResult(
            intersection_cardinality=counts.h1p,
            union_cardinality=counts.h2p,
            counts=counts,
            keygen_reports=[o.keygen_report for o in outcomes],
            channel_reports=[r for o in outcomes for r in o.channel_reports],
            resources=ResourceCounters.from_transcript(transcript),
            transcript=transcript,
            groups=groups,
            membership=membership,
            multiplier=k,
            masked_sets=masked,
            masks=masks,
            q=q,
        )

    def run_two_party(self, set_a, set_b, rng, overrides=None):
        result = self._run([set_a, set_b], rng, overrides)
        h1, h2, h3, h4 = result.counts.two_party
        if h1 + h2 + h3 + h4 != result.q:
            raise RuntimeError(f"计数之和 {h1 + h2 + h3 + h4} 不等于 q = {result.q}")
        result.intersection_cardinality = h1
        result.union_cardinality = h1 + h2 + h3
        logging.info(f"两方协议完成: h=({h1},{h2},{h3},{h4}), 交集 {h1}, 并集 {h1 + h2 + h3}")
        return result

    def run_multi_party(self, sets, rng, overrides=None):
        result = self._run(list(sets), rng, overrides)
        logging.info(
            f"{len(sets)} 方协议完成: 交集 {result.intersection_cardinality}, 并集 {result.union_cardinality}"
        )
        return result


def run_two_party(set_a, set_b, config, rng, overrides=None):
    return ProtocolEngine(config).run_two_party(set_a, set_b, rng, overrides)


def run_multi_party(sets, config, rng, overrides=None):
    return ProtocolEngine(config).run_multi_party(sets, rng, overrides)
