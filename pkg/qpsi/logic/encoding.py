"""
第二阶段：隐私编码。

集合元素先乘以共享密钥 k（模 q），再按二进制掩码 kb 的每一位决定编码约定，
把第 j 个位置的成员关系写成两量子比特的计算基态。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from qpsi.logic.errors import ConfigError, ModulusMismatch, NonInvertibleMultiplier
from qpsi.logic.qkd import SimulatedQKD
from qpsi.logic.statevector import StateVector


@dataclass(frozen=True)
class PrivateSet:
    elements: frozenset
    q: int

    def __post_init__(self):
        if int(self.q) < 2:
            raise ConfigError(f"模数 q 必须 >= 2: {self.q}")
        elements = frozenset(int(x) for x in self.elements)
        outside = sorted(x for x in elements if not 0 <= x < self.q)
        if outside:
            raise ConfigError(f"集合元素 {outside} 不在 [0, {self.q - 1}] 内")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "q", int(self.q))

    @classmethod
    def from_values(cls, values, q, name="集合"):
        values = [int(v) for v in values]
        if len(set(values)) != len(values):
            raise ConfigError(f"{name} 含有重复元素: {values}")
        return cls(frozenset(values), q)

    def __len__(self):
        return len(self.elements)

    def __contains__(self, item):
        return item in self.elements

    def sorted(self):
        return sorted(self.elements)


@dataclass(frozen=True)
class MaskedSet:
    elements: frozenset
    q: int

    def __len__(self):
        return len(self.elements)

    def __contains__(self, item):
        return item in self.elements

    def sorted(self):
        return sorted(self.elements)


@dataclass(frozen=True)
class BinaryMask:
    bits: str

    def __post_init__(self):
        if any(b not in "01" for b in self.bits):
            raise ValueError(f"二进制掩码只能包含 0 和 1: {self.bits!r}")

    def __len__(self):
        return len(self.bits)

    def bit(self, j):
        return int(self.bits[j])


def check_common_modulus(sets):
    moduli = {s.q for s in sets}
    if len(moduli) != 1:
        raise ModulusMismatch(moduli)
    return moduli.pop()


def units_of(q):
    return [k for k in range(1, q) if math.gcd(k, q) == 1]


class KeySourceKind(Enum):
    IDEAL = "ideal"
    BB84 = "bb84"


class KeySource:
    """
    数据持有方之间共享的经典密钥源，所有订阅方得到同一串比特。
    ideal 为种子化的共享随机数；bb84 由首个订阅方与其余每个订阅方分别跑 BB84，
    再用两两的会话密钥一次一密地转发同一串比特。
    """

    THIRD_PARTY = "TP"

    def __init__(self, kind=KeySourceKind.IDEAL, seed=0, adversary=None, threshold=0):
        self.kind = KeySourceKind(kind)
        self.seed = int(seed)
        self.adversary = adversary
        self.threshold = threshold
        self.subscribers = []
        self.qkd_reports = []
        self.bits_consumed = 0
        self._rng = np.random.default_rng(self.seed)

    def subscribe(self, party):
        if party == self.THIRD_PARTY:
            raise ValueError("TP 不能订阅数据持有方之间的密钥源")
        if party not in self.subscribers:
            self.subscribers.append(party)
        return self

    def _ideal_bits(self, count):
        return "".join(str(int(b)) for b in self._rng.integers(0, 2, size=count))

    def _bb84_bits(self, count):
        if len(self.subscribers) < 2:
            raise ValueError("BB84 密钥源至少需要两个订阅方")
        leader, *others = self.subscribers
        shared = self._ideal_bits(count)
        for other in others:
            session = SimulatedQKD(self._rng, self.adversary, threshold=self.threshold,
                                   sender=leader, receiver=other)
            pad_leader, pad_other = session.generate(count)
            cipher = "".join(str(int(s) ^ int(p)) for s, p in zip(shared, pad_leader))
            received = "".join(str(int(c) ^ int(p)) for c, p in zip(cipher, pad_other))
            self.qkd_reports.append(session.report)
            if received != shared:
                raise ValueError(f"{other} 收到的密钥与 {leader} 不一致")
        return shared

    def bits(self, count):
        if count <= 0:
            return ""
        self.bits_consumed += count
        if self.kind is KeySourceKind.BB84:
            return self._bb84_bits(count)
        return self._ideal_bits(count)


def draw_multiplier(source, q):
    """对 Z_q 的单位群做拒绝采样，k 在所有与 q 互素的剩余上均匀分布。"""
    if q < 2:
        raise ConfigError(f"模数 q 必须 >= 2: {q}")
    units = units_of(q)
    if len(units) == 1:
        return units[0]
    width = (len(units) - 1).bit_length()
    while True:
        index = int(source.bits(width), 2)
        if index < len(units):
            return units[index]


def draw_binary_mask(source, q):
    return BinaryMask(source.bits(q))


def mask_set(s, k):
    if math.gcd(k, s.q) != 1:
        raise NonInvertibleMultiplier(k, s.q)
    return MaskedSet(frozenset((k * x) % s.q for x in s.elements), s.q)


def unmask_set(masked, k):
    if math.gcd(k, masked.q) != 1:
        raise NonInvertibleMultiplier(k, masked.q)
    inverse = pow(k, -1, masked.q)
    return PrivateSet(frozenset((inverse * x) % masked.q for x in masked.elements), masked.q)


class Side(Enum):
    A = "A-side"
    B = "B-side"


# (side, kb_j, 是否成员) -> 两比特标签
ITEM_BITS = {
    (Side.A, 0, False): "00",
    (Side.A, 0, True): "01",
    (Side.B, 0, False): "11",
    (Side.B, 0, True): "01",
    (Side.A, 1, False): "11",
    (Side.A, 1, True): "10",
    (Side.B, 1, False): "00",
    (Side.B, 1, True): "10",
}


def item_bits(member, mask_bit, side):
    return ITEM_BITS[(Side(side), int(mask_bit), bool(member))]


def item_bit_strings(masked, mask, side):
    if len(mask) != masked.q:
        raise ValueError(f"掩码长度 {len(mask)} 与 q={masked.q} 不符")
    return [item_bits(j in masked, mask.bit(j), side) for j in range(masked.q)]


def prepare_item_states(masked, mask, side):
    """第 j 项为两量子比特计算基态，j = 0..q-1。"""
    states = [StateVector.from_bits(bits) for bits in item_bit_strings(masked, mask, side)]
    logging.debug(f"{Side(side).value} 制备了 {len(states)} 个两比特态")
    return states
