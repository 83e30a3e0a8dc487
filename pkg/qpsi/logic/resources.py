"""
量子资源统计。核心计数沿用效率公式的口径：
不计密钥分发（k、kb）和窃听检测（诱骗光子）的开销，delta 轮的额外粒子也单独计数。
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

MESSAGE_KINDS = ("quantum", "classical", "output")


@dataclass
class ResourceCounters:
    qubits_prepared_core: int = 0
    qubits_prepared_extra: int = 0
    qubits_decoy: int = 0
    classical_bits_output: int = 0
    messages_sent: int = 0

    @property
    def qubits_prepared_total(self):
        return self.qubits_prepared_core + self.qubits_prepared_extra + self.qubits_decoy

    @classmethod
    def from_transcript(cls, events):
        counters = cls()
        for event in events:
            counters.qubits_prepared_core += event.core_qubits
            counters.qubits_prepared_extra += event.extra_qubits
            counters.qubits_decoy += event.decoy_qubits
            if event.kind == "output":
                counters.classical_bits_output += event.classical_bits
            if event.kind in MESSAGE_KINDS:
                counters.messages_sent += 1
        return counters

    def efficiency(self, q):
        """eta = q / (核心量子比特数 + 输出经典比特数)。"""
        return Fraction(q, self.qubits_prepared_core + self.classical_bits_output)

    def to_dict(self):
        return {
            "qubits_prepared_core": self.qubits_prepared_core,
            "qubits_prepared_extra": self.qubits_prepared_extra,
            "qubits_decoy": self.qubits_decoy,
            "qubits_prepared_total": self.qubits_prepared_total,
            "classical_bits_output": self.classical_bits_output,
            "messages_sent": self.messages_sent,
        }


def expected_core_qubits(q, m):
    return 16 * math.ceil(m / 2) * q
