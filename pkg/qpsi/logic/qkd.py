"""
简化的 BB84 密钥分发，用于在数据持有方之间建立乘法密钥 k 和二进制掩码 kb。

发送方随机选取比特和基制备单量子比特，经过信道上的窃听者，
接收方随机选基测量；公开比对基后筛选，再公开一部分筛选后的比特估计误码率。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

from qpsi.logic.channel import AdversaryStrategy, Eavesdropper, QuantumMemory, Slot
from qpsi.logic.errors import AbortEavesdropping
from qpsi.logic.statevector import Basis, StateVector, measure

BB84_STATES = {
    (Basis.Z, 0): "0",
    (Basis.Z, 1): "1",
    (Basis.X, 0): "+",
    (Basis.X, 1): "-",
}


@dataclass
class QKDReport:
    sender: str
    receiver: str
    qubits_sent: int = 0
    sifted: int = 0
    sampled: int = 0
    errors: int = 0

    @property
    def error_rate(self):
        return Fraction(self.errors, self.sampled) if self.sampled else Fraction(0)

    def to_dict(self):
        return {
            "sender": self.sender,
            "receiver": self.receiver,
            "qubits_sent": self.qubits_sent,
            "sifted": self.sifted,
            "sampled": self.sampled,
            "errors": self.errors,
            "error_rate": float(self.error_rate),
        }


class SimulatedQKD:
    """一对用户之间的 BB84 会话；generate 返回 (发送方密钥, 接收方密钥)。"""

    def __init__(self, rng, adversary=None, sample_fraction=Fraction(1, 2), threshold=Fraction(0),
                 sender="A", receiver="B"):
        self.rng = rng
        self.eavesdropper = Eavesdropper(adversary or AdversaryStrategy())
        self.sample_fraction = Fraction(sample_fraction)
        self.threshold = Fraction(threshold)
        self.report = QKDReport(sender, receiver)

    def _batch(self, size):
        memory = QuantumMemory()
        bits = self.rng.integers(0, 2, size=size)
        send_bases = [Basis.Z if b == 0 else Basis.X for b in self.rng.integers(0, 2, size=size)]
        recv_bases = [Basis.Z if b == 0 else Basis.X for b in self.rng.integers(0, 2, size=size)]

        sender_key, receiver_key = [], []
        for bit, send_basis, recv_basis in zip(bits, send_bases, recv_bases):
            register = memory.allocate(StateVector.from_label(BB84_STATES[(send_basis, int(bit))]))
            self.eavesdropper.attack(memory, Slot(register, 0), self.rng)
            outcome, _ = measure(memory.state(register), [0], recv_basis, self.rng)
            memory.release(register)
            if send_basis is recv_basis:
                sender_key.append(int(bit))
                receiver_key.append(int(outcome))
        self.report.qubits_sent += size
        self.report.sifted += len(sender_key)
        return sender_key, receiver_key

    def generate(self, num_bits):
        sender_key, receiver_key = [], []
        phase = "qkd"
        while len(sender_key) < num_bits:
            missing = num_bits - len(sender_key)
            # 筛选保留约 1/2，抽检再消耗 sample_fraction
            keep = (1 - self.sample_fraction) / 2
            size = math.ceil(missing / keep) + 8
            s_bits, r_bits = self._batch(size)

            sample_size = math.ceil(self.sample_fraction * len(s_bits))
            sample = set(int(i) for i in self.rng.choice(len(s_bits), size=sample_size, replace=False)) if s_bits else set()
            errors = sum(1 for i in sample if s_bits[i] != r_bits[i])
            self.report.sampled += len(sample)
            self.report.errors += errors
            if self.report.error_rate > self.threshold:
                logging.error(
                    f"BB84 {self.report.sender}->{self.report.receiver} 抽检误码率 "
                    f"{float(self.report.error_rate):.4f} 超过阈值"
                )
                raise AbortEavesdropping(phase, "BB84 抽检误码率超过阈值", self.report.to_dict())

            sender_key.extend(b for i, b in enumerate(s_bits) if i not in sample)
            receiver_key.extend(b for i, b in enumerate(r_bits) if i not in sample)

        sender_key = "".join(str(b) for b in sender_key[:num_bits])
        receiver_key = "".join(str(b) for b in receiver_key[:num_bits])
        if sender_key != receiver_key:
            raise AbortEavesdropping(phase, "BB84 双方密钥不一致", self.report.to_dict())
        return sender_key, receiver_key
