"""
第一阶段：量子秘密共享密钥生成。

TP 制备 4q+delta 份 |Psi> = sum_{a,b} |a, b, a xor b> / 2，把第 2、3 个量子比特
经诱骗光子保护的信道分别发给 Alice 和 Bob；双方随机选择 Z/X 基测量，
随机抽取一部分轮次按测量结果的关联关系检验 TP 是否诚实，
剩下的 Z-Z 轮次产生满足 r_T = r_A xor r_B 的密钥。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from qpsi.logic.channel import AdversaryKind, QuantumMemory, Slot
from qpsi.logic.errors import AbortDishonestTP, AbortEavesdropping, ConfigError, InsufficientKeyBits
from qpsi.logic.pauli_qotp import KeyPair2, PauliKey
from qpsi.logic.statevector import (
    Basis,
    StateVector,
    apply_gates,
    cnot_gate,
    h_gate,
    measure_in_bases,
)

DEFAULT_TEST_FRACTION = Fraction(1, 8)
DEFAULT_SHORTFALL_BOUND = 1e-9
# Alice、Bob 各以 1/2 概率选 Z 基
Z_Z_PROBABILITY = 0.25
SAME_BASIS_PROBABILITY = 0.5

TP_WIRE, ALICE_WIRE, BOB_WIRE = 0, 1, 2


def count_test_rounds(rounds, test_fraction):
    return math.ceil(Fraction(test_fraction) * rounds)


def key_shortfall_probability(q, delta, test_fraction=DEFAULT_TEST_FRACTION):
    """非检测轮次中 Z-Z 轮少于 4q 的概率。"""
    rounds = 4 * q + delta
    candidates = rounds - count_test_rounds(rounds, test_fraction)
    return float(stats.binom.cdf(4 * q - 1, candidates, Z_Z_PROBABILITY))


def default_delta(q, test_fraction=DEFAULT_TEST_FRACTION, bound=DEFAULT_SHORTFALL_BOUND):
    """
    使密钥不足概率低于 bound 的最小 delta。
    非检测轮数随总轮数单调不减，所以可以二分。
    """
    if key_shortfall_probability(q, 0, test_fraction) < bound:
        return 0
    high = 16 * q + 64
    while key_shortfall_probability(q, high, test_fraction) >= bound:
        high *= 2
    low = 0
    while high - low > 1:
        mid = (low + high) // 2
        if key_shortfall_probability(q, mid, test_fraction) < bound:
            high = mid
        else:
            low = mid
    return high


@dataclass(frozen=True)
class KeygenConfig:
    q: int
    delta: int | None = None
    test_fraction: Fraction = DEFAULT_TEST_FRACTION
    error_threshold: Fraction = Fraction(0)

    def __post_init__(self):
        if int(self.q) < 1:
            raise ConfigError(f"q 必须是正整数: {self.q}")
        test_fraction = Fraction(self.test_fraction)
        if not 0 < test_fraction < 1:
            raise ConfigError(f"test_fraction 必须在 (0, 1) 内: {self.test_fraction}")
        error_threshold = Fraction(self.error_threshold)
        if not 0 <= error_threshold < 1:
            raise ConfigError(f"error_threshold 必须在 [0, 1) 内: {self.error_threshold}")
        delta = self.delta
        if delta is None:
            delta = default_delta(int(self.q), test_fraction)
        elif int(delta) < 0:
            raise ConfigError(f"delta 不能为负: {delta}")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "delta", int(delta))
        object.__setattr__(self, "test_fraction", test_fraction)
        object.__setattr__(self, "error_threshold", error_threshold)

    @property
    def rounds(self):
        return 4 * self.q + self.delta

    @property
    def key_length(self):
        return 4 * self.q

    @property
    def test_rounds(self):
        return count_test_rounds(self.rounds, self.test_fraction)


@dataclass
class KeygenRound:
    round_id: int
    alice_basis: Basis
    bob_basis: Basis
    tp_basis: Basis = Basis.Z
    tp_outcome: int | None = None
    alice_outcome: int | None = None
    bob_outcome: int | None = None
    used_as_test: bool = False

    @property
    def measured(self):
        return None not in (self.tp_outcome, self.alice_outcome, self.bob_outcome)

    @property
    def same_basis(self):
        return self.alice_basis is self.bob_basis

    @property
    def setting(self):
        return f"{self.alice_basis.value}{self.bob_basis.value}"


def verify_table1(round_):
    """Z-Z 轮要求 alice xor bob = tp；X-X 轮要求 alice = bob。"""
    if not round_.measured:
        raise ValueError(f"第 {round_.round_id} 轮尚未测量")
    if not round_.same_basis:
        raise ValueError(f"第 {round_.round_id} 轮双方测量基不同，关联检验不适用")
    if round_.alice_basis is Basis.Z:
        return (round_.alice_outcome ^ round_.bob_outcome) == round_.tp_outcome
    return round_.alice_outcome == round_.bob_outcome


def prepare_psi():
    """H(0)、H(1)、CNOT(0->2)、CNOT(1->2) 作用在 |000> 上。"""
    gates = [h_gate(0), h_gate(1), cnot_gate(0, 2), cnot_gate(1, 2)]
    return apply_gates(StateVector.zero(3), gates)


def _bits_to_pairs(bits, q):
    return [KeyPair2(int(bits[2 * j]), int(bits[2 * j + 1])) for j in range(q)]


@dataclass(frozen=True)
class TPKeyView:
    """TP 只能看到 r_T，即两方密钥的逐位异或。"""

    r_T: str

    def xor_pairs(self, q):
        return _bits_to_pairs(self.r_T, q)


@dataclass(frozen=True)
class OwnerKeyView:
    owner: str
    bits: str

    def x_pairs(self, q):
        return _bits_to_pairs(self.bits, q)

    def pauli_keys(self, q):
        """前 2q 位是 X 指数，后 2q 位是 Z 指数。"""
        return [PauliKey(int(self.bits[i]), int(self.bits[2 * q + i])) for i in range(2 * q)]


@dataclass(frozen=True)
class SharedKeyMaterial:
    r_A: str
    r_B: str
    r_T: str

    def __post_init__(self):
        if not len(self.r_A) == len(self.r_B) == len(self.r_T):
            raise ValueError("r_A、r_B、r_T 长度不一致")
        for a, b, t in zip(self.r_A, self.r_B, self.r_T):
            if int(a) ^ int(b) != int(t):
                raise ValueError("密钥不满足 r_T = r_A xor r_B")

    def __len__(self):
        return len(self.r_T)

    def tp_view(self):
        return TPKeyView(self.r_T)

    def owner_view(self, owner):
        if owner == "A":
            return OwnerKeyView("A", self.r_A)
        if owner == "B":
            return OwnerKeyView("B", self.r_B)
        raise ValueError(f"未知的数据持有方: {owner}")

    @classmethod
    def from_pads(cls, r_A, r_B):
        r_T = "".join(str(int(a) ^ int(b)) for a, b in zip(r_A, r_B))
        return cls(r_A, r_B, r_T)


@dataclass
class KeygenReport:
    rounds: int = 0
    delta: int = 0
    test_rounds: int = 0
    comparable_tests: int = 0
    violations: int = 0
    cases: dict = field(default_factory=dict)
    key_rounds_available: int = 0
    key_bits: int = 0
    key_parity_errors: int = 0
    channel_reports: list = field(default_factory=list)

    @property
    def violation_rate(self):
        if self.comparable_tests == 0:
            return None
        return Fraction(self.violations, self.comparable_tests)

    def to_dict(self):
        rate = self.violation_rate
        return {
            "rounds": self.rounds,
            "delta": self.delta,
            "test_rounds": self.test_rounds,
            "comparable_tests": self.comparable_tests,
            "violations": self.violations,
            "violation_rate": None if rate is None else float(rate),
            "cases": {k: dict(v) for k, v in sorted(self.cases.items())},
            "key_rounds_available": self.key_rounds_available,
            "key_bits": self.key_bits,
            "key_parity_errors": self.key_parity_errors,
            "channel_reports": [r.to_dict() for r in self.channel_reports],
        }


def draw_bases(rng, count):
    return [Basis.Z if b == 0 else Basis.X for b in rng.integers(0, 2, size=count)]


def measure_round(state, round_, rng):
    bits, _ = measure_in_bases(
        state,
        [(TP_WIRE, round_.tp_basis), (ALICE_WIRE, round_.alice_basis), (BOB_WIRE, round_.bob_basis)],
        rng,
    )
    round_.tp_outcome, round_.alice_outcome, round_.bob_outcome = (int(b) for b in bits)
    return round_


def sample_rounds(count, rng, state=None, alice_basis=None, bob_basis=None):
    """
    不经过信道直接对 |Psi>（或替换态）做 count 轮测量，
    统计实验使用；固定基为 None 时随机选择。
    """
    state = state or prepare_psi()
    alice = [alice_basis] * count if alice_basis else draw_bases(rng, count)
    bob = [bob_basis] * count if bob_basis else draw_bases(rng, count)
    return [measure_round(state, KeygenRound(i, alice[i], bob[i]), rng) for i in range(count)]


def run_keygen(config, channel, rng, tp_state=None, session=""):
    """
    执行完整的密钥生成。tp_state 用于模拟不诚实的 TP 用其他三比特态代替 |Psi>。
    返回 (SharedKeyMaterial, KeygenReport)。
    """
    psi = tp_state or prepare_psi()
    if psi.num_qubits != 3:
        raise ValueError(f"TP 制备的态必须是 3 个量子比特，实际为 {psi.num_qubits}")
    prefix = f"[{session}] " if session else ""
    phase = "keygen"
    report = KeygenReport(rounds=config.rounds, delta=config.delta, test_rounds=config.test_rounds)
    logging.info(f"{prefix}密钥生成开始: q={config.q}, 共 {config.rounds} 轮 (delta={config.delta})")

    memory = QuantumMemory()
    registers = [memory.allocate(psi, ["TP", "Alice", "Bob"]) for _ in range(config.rounds)]

    _, alice_report = channel.send(
        memory, [Slot(r, ALICE_WIRE) for r in registers], rng, "TP", "Alice", phase
    )
    _, bob_report = channel.send(
        memory, [Slot(r, BOB_WIRE) for r in registers], rng, "TP", "Bob", phase
    )
    report.channel_reports = [alice_report, bob_report]

    alice_bases = draw_bases(rng, config.rounds)
    bob_bases = draw_bases(rng, config.rounds)
    rounds = []
    for i, register in enumerate(registers):
        round_ = KeygenRound(i, alice_bases[i], bob_bases[i])
        measure_round(memory.state(register), round_, rng)
        memory.release(register)
        rounds.append(round_)

    test_ids = rng.choice(config.rounds, size=config.test_rounds, replace=False)
    for i in test_ids:
        rounds[int(i)].used_as_test = True

    cases = {"ZZ": {"tested": 0, "violations": 0}, "XX": {"tested": 0, "violations": 0}}
    for round_ in rounds:
        if not (round_.used_as_test and round_.same_basis):
            continue
        case = cases[round_.setting]
        case["tested"] += 1
        if not verify_table1(round_):
            case["violations"] += 1
    report.cases = cases
    report.comparable_tests = sum(c["tested"] for c in cases.values())
    report.violations = sum(c["violations"] for c in cases.values())

    if report.comparable_tests == 0:
        logging.error(f"{prefix}检测轮次中没有双方同基的轮次，无法检验 TP")
        raise AbortDishonestTP(phase, "没有可用于检验 TP 的同基轮次", report.to_dict())
    rate = report.violation_rate
    if rate > config.error_threshold:
        logging.error(
            f"{prefix}测量关联违背率 {float(rate):.4f} 超过阈值 {float(config.error_threshold):.4f}"
        )
        raise AbortDishonestTP(phase, f"测量关联违背率 {float(rate):.4f} 超过阈值", report.to_dict())

    key_rounds = [
        r for r in rounds
        if not r.used_as_test and r.alice_basis is Basis.Z and r.bob_basis is Basis.Z
    ]
    report.key_rounds_available = len(key_rounds)
    if len(key_rounds) < config.key_length:
        logging.error(f"{prefix}Z-Z 轮次只有 {len(key_rounds)} 个，不足 {config.key_length} 个")
        raise InsufficientKeyBits(
            phase,
            f"可用 Z-Z 轮次 {len(key_rounds)} 少于 4q = {config.key_length}，请增大 delta",
            report.to_dict(),
        )

    key_rounds = key_rounds[: config.key_length]
    # 阈值放宽后扰动可能漏过检验轮，此时密钥轮不再满足 r_T = r_A xor r_B
    report.key_parity_errors = sum(
        1 for r in key_rounds if r.alice_outcome ^ r.bob_outcome != r.tp_outcome
    )
    if report.key_parity_errors:
        logging.error(f"{prefix}{report.key_parity_errors} 个密钥轮不满足 r_T = r_A xor r_B")
        reason = f"{report.key_parity_errors}/{len(key_rounds)} 个密钥轮的结果不一致"
        if tp_state is None and channel.strategy.kind is not AdversaryKind.NONE:
            raise AbortEavesdropping(phase, reason, report.to_dict())
        raise AbortDishonestTP(phase, reason, report.to_dict())

    material = SharedKeyMaterial(
        "".join(str(r.alice_outcome) for r in key_rounds),
        "".join(str(r.bob_outcome) for r in key_rounds),
        "".join(str(r.tp_outcome) for r in key_rounds),
    )
    report.key_bits = len(material)
    logging.info(
        f"{prefix}密钥生成完成: 检验 {report.comparable_tests} 轮无违背，"
        f"可用 Z-Z 轮 {report.key_rounds_available}，取 {report.key_bits} 位"
    )
    return material, report


def rejection_probability(p_violation, rounds, test_fraction=DEFAULT_TEST_FRACTION, threshold=0):
    """
    替换态每个同基检验轮以概率 p_violation 违背关联关系时，
    整个会话被判定为不诚实 TP 的精确概率。
    检验轮中同基轮数 C ~ B(t, 1/2)，违背数 V ~ B(C, p)，拒绝条件 V/C > threshold。
    C = 0 时会话另行中止，不计入这里的因违背而拒绝的概率。
    """
    t = count_test_rounds(rounds, test_fraction)
    threshold = Fraction(threshold)
    comparable = np.arange(t + 1)
    weights = stats.binom.pmf(comparable, t, SAME_BASIS_PROBABILITY)
    reject = np.zeros(t + 1)
    for c in comparable[1:]:
        allowed = math.floor(threshold * int(c))
        reject[c] = stats.binom.sf(allowed, int(c), p_violation)
    return float(np.dot(weights, reject))


def rounds_for_rejection(p_violation, target=1e-6, test_fraction=DEFAULT_TEST_FRACTION, threshold=0):
    """使 rejection_probability >= 1 - target 的最小总轮数。"""
    if not 0 < p_violation <= 1:
        raise ValueError(f"违背概率必须在 (0, 1] 内: {p_violation}")
    if threshold >= p_violation:
        raise ValueError("阈值不小于违背概率时无法保证拒绝")

    def ok(n):
        return rejection_probability(p_violation, n, test_fraction, threshold) >= 1 - target

    high = 8
    while not ok(high):
        high *= 2
    low = high // 2 if high > 8 else 0
    while high - low > 1:
        mid = (low + high) // 2
        if ok(mid):
            high = mid
        else:
            low = mid
    return high
