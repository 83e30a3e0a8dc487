"""经典基准与资源核算。"""

from fractions import Fraction
import math

from qpsi.logic.encoding import check_common_modulus
from qpsi.logic.resources import ResourceCounters, expected_core_qubits

# 交集、并集两个基数
CLASSICAL_OUTPUT_BITS = 2


def classical_oracle(sets):
    check_common_modulus(sets)
    elements = [set(s.elements) for s in sets]
    return len(set.intersection(*elements)), len(set.union(*elements))


def qubit_efficiency(q, m=2):
    """q / (16 * ceil(m/2) * q + 2)；m = 2 时即 q / (16q + 2)。"""
    if q < 2 or m < 2:
        raise ValueError(f"要求 q >= 2 且 m >= 2: q={q}, m={m}")
    return Fraction(q, expected_core_qubits(q, m) + CLASSICAL_OUTPUT_BITS)


def verify_resources(transcript, q, m):
    counters = ResourceCounters.from_transcript(transcript)
    return (
        counters.qubits_prepared_core == 16 * math.ceil(m / 2) * q
        and counters.classical_bits_output == CLASSICAL_OUTPUT_BITS
    )


def efficiency_summary(result):
    counters = result.resources
    measured = counters.efficiency(result.q)
    formula = qubit_efficiency(result.q, result.party_count)
    return {
        "measured": str(measured),
        "formula": str(formula),
        "measured_value": float(measured),
        "agrees": measured == formula,
    }
