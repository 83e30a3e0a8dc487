"""
模拟量子信道：诱骗光子的插入与校验，以及可插拔的窃听策略
（截获-重发、纠缠-测量 U_f|x>|y> = |x>|y xor f(x)>）。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import combinations
from typing import NamedTuple

from qpsi.logic.errors import AbortEavesdropping, ConfigError
from qpsi.logic.statevector import (
    Basis,
    StateVector,
    apply_gates,
    cnot_gate,
    measure,
    measurement_distribution,
    reduced_density,
    x_gate,
)

DECOY_LABELS = ("0", "1", "+", "-")

# 诱骗态 -> (制备基, 该基下的正确测量比特)
DECOY_CHECKS = {
    "0": (Basis.Z, "0"),
    "1": (Basis.Z, "1"),
    "+": (Basis.X, "0"),
    "-": (Basis.X, "1"),
}


def _exact(probability):
    # 本模块枚举的电路概率都是二进分数，消除 1/sqrt(2) 带来的舍入
    return Fraction(probability).limit_denominator(1 << 16)


class Slot(NamedTuple):
    register: int
    wire: int


class QuantumMemory:
    """
    会话内的量子存储：寄存器编号 -> 联合态。
    纠缠的量子比特共享同一个寄存器，消息只引用 (寄存器, 线路)。
    追加的线路总是放在末尾，已有线路下标保持不变。
    """

    def __init__(self):
        self._states = {}
        self._labels = {}
        self._next_id = 0

    def allocate(self, state, labels=None):
        register = self._next_id
        self._next_id += 1
        self._states[register] = state
        self._labels[register] = list(labels or [""] * state.num_qubits)
        return register

    def state(self, register):
        return self._states[register]

    def labels(self, register):
        return tuple(self._labels[register])

    def replace(self, register, state):
        if state.num_qubits != self._states[register].num_qubits:
            raise ValueError("替换的态与寄存器的量子比特数不一致")
        self._states[register] = state

    def append_wire(self, register, wire_state, label=""):
        self._states[register] = self._states[register].tensor(wire_state)
        self._labels[register].append(label)
        return self._states[register].num_qubits - 1

    def merge(self, first, second):
        """把 second 张量拼接到 first 之后，返回 second 原线路在 first 中的偏移量。"""
        offset = self._states[first].num_qubits
        self._states[first] = self._states[first].tensor(self._states[second])
        self._labels[first].extend(self._labels[second])
        self.release(second)
        return offset

    def release(self, register):
        self._states.pop(register, None)
        self._labels.pop(register, None)

    def __contains__(self, register):
        return register in self._states

    def __len__(self):
        return len(self._states)


class DecoySpec(NamedTuple):
    position: int
    label: str


@dataclass
class QuantumMessage:
    """按传输顺序排列的量子比特序列；诱骗光子的态标签由发送方私下保留。"""

    memory: QuantumMemory
    slots: list
    decoy_positions: frozenset = frozenset()
    sender: str = ""
    receiver: str = ""

    def payload_slots(self):
        return [slot for i, slot in enumerate(self.slots) if i not in self.decoy_positions]

    def __len__(self):
        return len(self.slots)


class AdversaryKind(Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept-resend"
    ENTANGLE_MEASURE = "entangle-measure"


RESEND_BASIS_POLICIES = ("random", "Z", "X")


@dataclass(frozen=True)
class AdversaryStrategy:
    kind: AdversaryKind = AdversaryKind.NONE
    f: tuple = (0, 1)
    resend_basis: str = "random"

    def __post_init__(self):
        if len(self.f) != 2 or any(v not in (0, 1) for v in self.f):
            raise ConfigError(f"U_f 真值表必须是两个比特: {self.f}")
        if self.resend_basis not in RESEND_BASIS_POLICIES:
            raise ConfigError(f"未知的重发基策略: {self.resend_basis}")

    @classmethod
    def from_name(cls, name, f=(0, 1), resend_basis="random"):
        try:
            kind = AdversaryKind(str(name or "none").strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in AdversaryKind)
            raise ConfigError(f"未知的窃听策略 '{name}'，可选: {choices}")
        return cls(kind, tuple(int(v) for v in f), resend_basis)

    @property
    def is_error_free(self):
        """f(0) = f(1) 时 U_f 不扰动任何诱骗态。"""
        return self.kind is not AdversaryKind.ENTANGLE_MEASURE or self.f[0] == self.f[1]

    def u_f_gates(self, data_wire, ancilla_wire):
        # f(x) = f(0) xor (f(0) xor f(1)) * x
        gates = []
        if self.f[0]:
            gates.append(x_gate(ancilla_wire))
        if self.f[0] ^ self.f[1]:
            gates.append(cnot_gate(data_wire, ancilla_wire))
        return gates

    def to_dict(self):
        return {"kind": self.kind.value, "f": list(self.f), "resend_basis": self.resend_basis}


class Eavesdropper:
    """窃听者的运行时状态；辅助粒子以 (寄存器, 线路) 引用的形式归其所有。"""

    def __init__(self, strategy=None, name="Eve"):
        self.strategy = strategy or AdversaryStrategy()
        self.name = name
        # (所属 QuantumMemory, Slot)；寄存器编号只在同一个 QuantumMemory 内唯一
        self._held = []
        self.intercepted = 0

    def _resend_basis(self, rng):
        policy = self.strategy.resend_basis
        if policy == "random":
            return Basis.Z if rng.random() < 0.5 else Basis.X
        return Basis(policy)

    def attack(self, memory, slot, rng):
        kind = self.strategy.kind
        if kind is AdversaryKind.NONE:
            return
        self.intercepted += 1
        state = memory.state(slot.register)
        if kind is AdversaryKind.INTERCEPT_RESEND:
            # 投影测量后被测比特已是本征态，按结果重新制备即等于坍缩后的态
            _, collapsed = measure(state, [slot.wire], self._resend_basis(rng), rng)
            memory.replace(slot.register, collapsed)
            return

        ancilla_wire = memory.append_wire(
            slot.register, StateVector.zero(1), label=f"{self.name}:{len(self._held)}"
        )
        state = memory.state(slot.register)
        gates = self.strategy.u_f_gates(slot.wire, ancilla_wire)
        if gates:
            memory.replace(slot.register, apply_gates(state, gates))
        self._held.append((memory, Slot(slot.register, ancilla_wire)))

    @property
    def ancillas(self):
        return [slot for _, slot in self._held]

    def live_ancillas(self, memory):
        return [slot for owner, slot in self._held if owner is memory and slot.register in memory]


@dataclass
class ChannelReport:
    decoys_tested: int = 0
    decoys_wrong: int = 0
    link: str = ""
    phase: str = ""

    @property
    def error_rate(self):
        if self.decoys_tested == 0:
            raise ValueError(f"{self.link} 没有检测任何诱骗光子，无法给出误码率")
        return Fraction(self.decoys_wrong, self.decoys_tested)

    def to_dict(self):
        rate = float(self.error_rate) if self.decoys_tested else None
        return {
            "link": self.link,
            "phase": self.phase,
            "decoys_tested": self.decoys_tested,
            "decoys_wrong": self.decoys_wrong,
            "error_rate": rate,
        }


def insert_decoys(payload_len, num_decoys, rng):
    """诱骗光子在长度 payload_len + num_decoys 的交织序列中的位置与态。"""
    if num_decoys < 0:
        raise ValueError(f"诱骗光子数不能为负: {num_decoys}")
    if num_decoys == 0:
        return []
    total = payload_len + num_decoys
    positions = rng.choice(total, size=num_decoys, replace=False)
    labels = rng.integers(0, len(DECOY_LABELS), size=num_decoys)
    plan = [DecoySpec(int(p), DECOY_LABELS[int(l)]) for p, l in zip(positions, labels)]
    return sorted(plan)


def build_message(memory, payload_slots, plan, sender="", receiver=""):
    payload_slots = list(payload_slots)
    decoys = {decoy.position: decoy.label for decoy in plan}
    total = len(payload_slots) + len(decoys)
    if any(p >= total for p in decoys):
        raise ValueError("诱骗光子位置超出序列长度")

    slots = []
    payload_iter = iter(payload_slots)
    for position in range(total):
        if position in decoys:
            register = memory.allocate(StateVector.from_label(decoys[position]), ["decoy"])
            slots.append(Slot(register, 0))
        else:
            slots.append(next(payload_iter))
    return QuantumMessage(memory, slots, frozenset(decoys), sender, receiver)


def transmit(msg, adversary, rng):
    """逐个量子比特经过信道；adversary 为 None 时信道是恒等的。"""
    if adversary is None:
        return msg
    if isinstance(adversary, AdversaryStrategy):
        adversary = Eavesdropper(adversary)
    for slot in msg.slots:
        adversary.attack(msg.memory, slot, rng)
    return msg


def verify_decoys(msg, plan, rng):
    """
    发送方公布诱骗光子的位置和制备基，接收方按该基测量并比对。
    返回 (ChannelReport, 仅含载荷的消息)；诱骗光子的寄存器随之释放。
    """
    positions = frozenset(decoy.position for decoy in plan)
    if len(plan) != len(msg.decoy_positions) or positions != msg.decoy_positions:
        raise ValueError(
            f"诱骗方案与消息不匹配: 方案 {len(plan)} 个，消息 {len(msg.decoy_positions)} 个"
        )

    report = ChannelReport(link=f"{msg.sender}->{msg.receiver}")
    for decoy in plan:
        slot = msg.slots[decoy.position]
        basis, expected = DECOY_CHECKS[decoy.label]
        bits, _ = measure(msg.memory.state(slot.register), [slot.wire], basis, rng)
        report.decoys_tested += 1
        if bits != expected:
            report.decoys_wrong += 1
        msg.memory.release(slot.register)

    payload = QuantumMessage(msg.memory, msg.payload_slots(), frozenset(), msg.sender, msg.receiver)
    return report, payload


class QuantumChannel:
    """
    带诱骗光子保护的信道，同一个窃听者作用于经过它的所有消息。
    decoys_per_message 为 None 时诱骗光子数等于载荷长度。
    """

    def __init__(self, adversary=None, decoys_per_message=None, threshold=Fraction(0)):
        if decoys_per_message is not None and decoys_per_message < 1:
            raise ConfigError("decoys_per_message 必须 >= 1，零个诱骗光子无法检测窃听")
        self.strategy = adversary or AdversaryStrategy()
        self.eavesdropper = Eavesdropper(self.strategy)
        self.decoys_per_message = decoys_per_message
        self.threshold = Fraction(threshold)
        self.reports = []

    def send(self, memory, payload_slots, rng, sender, receiver, phase=""):
        payload_slots = list(payload_slots)
        num_decoys = self.decoys_per_message or len(payload_slots)
        plan = insert_decoys(len(payload_slots), num_decoys, rng)
        msg = build_message(memory, payload_slots, plan, sender, receiver)
        transmit(msg, self.eavesdropper, rng)
        report, payload = verify_decoys(msg, plan, rng)
        report.phase = phase
        self.reports.append(report)

        if report.decoys_tested == 0:
            raise AbortEavesdropping(phase, f"{report.link} 没有可检测的诱骗光子", report.to_dict())
        if report.error_rate > self.threshold:
            logging.error(
                f"{report.link} 诱骗光子误码率 {float(report.error_rate):.4f} 超过阈值 {float(self.threshold):.4f}"
            )
            raise AbortEavesdropping(
                phase,
                f"{report.link} 诱骗光子误码率 {float(report.error_rate):.4f} 超过阈值",
                report.to_dict(),
            )
        logging.info(
            f"{report.link} 窃听检测通过: {report.decoys_wrong}/{report.decoys_tested} 个诱骗光子出错"
        )
        return payload.slots, report


def intercept_resend_detection_probability(basis_weights=None):
    """枚举 4 种诱骗态 x 窃听者的测量基 x 测量结果，得到单个诱骗光子的检出概率。"""
    basis_weights = basis_weights or {Basis.Z: Fraction(1, 2), Basis.X: Fraction(1, 2)}
    total = Fraction(0)
    for label in DECOY_LABELS:
        check_basis, expected = DECOY_CHECKS[label]
        decoy = StateVector.from_label(label)
        for eve_basis, basis_weight in basis_weights.items():
            for bits, p_outcome in measurement_distribution(decoy, [0], eve_basis).items():
                resent_label = bits if eve_basis is Basis.Z else ("+" if bits == "0" else "-")
                resent = StateVector.from_label(resent_label)
                p_right = measurement_distribution(resent, [0], check_basis).get(expected, 0.0)
                total += Fraction(1, len(DECOY_LABELS)) * basis_weight * _exact(p_outcome) * (1 - _exact(p_right))
    return total


def _entangled_decoy(label, strategy):
    state = StateVector.from_label(label).tensor(StateVector.zero(1))
    gates = strategy.u_f_gates(0, 1)
    return apply_gates(state, gates) if gates else state


def entangle_measure_detection_probability(f, labels=DECOY_LABELS):
    """纠缠-测量攻击下，给定诱骗态集合上的平均检出概率（枚举计算）。"""
    strategy = AdversaryStrategy(AdversaryKind.ENTANGLE_MEASURE, tuple(f))
    total = Fraction(0)
    for label in labels:
        check_basis, expected = DECOY_CHECKS[label]
        state = _entangled_decoy(label, strategy)
        p_right = measurement_distribution(state, [0], check_basis).get(expected, 0.0)
        total += 1 - _exact(p_right)
    return total / len(labels)


def ancilla_states(f):
    """每种诱骗态经过 U_f 后窃听者辅助粒子的约化密度矩阵。"""
    strategy = AdversaryStrategy(AdversaryKind.ENTANGLE_MEASURE, tuple(f))
    return {label: reduced_density(_entangled_decoy(label, strategy), [1]) for label in DECOY_LABELS}


def ancilla_information_gain(f):
    """辅助粒子约化态两两之间的最大迹距离；为 0 表示窃听者得不到任何信息。"""
    states = ancilla_states(f)
    return max(
        states[a].trace_distance(states[b])
        for a, b in combinations(DECOY_LABELS, 2)
    )
