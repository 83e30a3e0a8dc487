"""
稠密态矢量引擎：只提供协议用到的 X、Z、H、CNOT 门和 Z/X 基测量，
以及安全性检查所需的密度矩阵平均、约化密度矩阵和迹距离。

比特序约定（全局唯一）：qubit 0 是基态标签的最高位。
|01> 表示 qubit 0 处于 |0>、qubit 1 处于 |1>，对应振幅下标 0b01 = 1。
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

ATOL = 1e-12
_SQRT2_INV = 1.0 / np.sqrt(2.0)

# 所有采样操作都显式接收随机流，不使用全局随机数
RandomStream = np.random.Generator


class GateKind(Enum):
    X = "X"
    Z = "Z"
    H = "H"
    CNOT = "CNOT"


class Basis(Enum):
    Z = "Z"
    X = "X"


# X 基测量 = H 后做 Z 基测量，再把 0/1 映射为 +/-
X_BASIS_LABELS = {"0": "+", "1": "-"}


def to_basis_labels(bits, basis):
    if basis is Basis.Z:
        return bits
    return "".join(X_BASIS_LABELS[b] for b in bits)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    target: int
    control: int | None = None

    def __post_init__(self):
        if self.kind is GateKind.CNOT:
            if self.control is None:
                raise ValueError("CNOT 门必须指定控制位")
            if self.control == self.target:
                raise ValueError(f"CNOT 的控制位与目标位相同: {self.target}")
        elif self.control is not None:
            raise ValueError(f"{self.kind.value} 门不接受控制位")

    @property
    def wires(self):
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)


def x_gate(target):
    return Gate(GateKind.X, target)


def z_gate(target):
    return Gate(GateKind.Z, target)


def h_gate(target):
    return Gate(GateKind.H, target)


def cnot_gate(control, target):
    return Gate(GateKind.CNOT, target, control)


@dataclass(frozen=True, eq=False)
class StateVector:
    """n 个量子比特的纯态，构造后不可修改。"""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if int(self.num_qubits) < 1:
            raise ValueError(f"量子比特数必须 >= 1: {self.num_qubits}")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (1 << self.num_qubits,):
            raise ValueError(
                f"振幅长度 {amps.shape[0]} 与 2^{self.num_qubits} 不符"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"态矢量未归一化: |psi|^2 = {norm!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "num_qubits", int(self.num_qubits))
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, num_qubits):
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def from_bits(cls, bits):
        """计算基态，如 from_bits('01')。"""
        bits = str(bits)
        if not bits or any(b not in "01" for b in bits):
            raise ValueError(f"非法的基态标签: {bits!r}")
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(len(bits), amps)

    @classmethod
    def from_label(cls, label):
        """单比特态 '0'、'1'、'+'、'-'。"""
        if label in ("0", "1"):
            return cls.from_bits(label)
        if label == "+":
            return cls(1, np.array([_SQRT2_INV, _SQRT2_INV]))
        if label == "-":
            return cls(1, np.array([_SQRT2_INV, -_SQRT2_INV]))
        raise ValueError(f"非法的单比特态标签: {label!r}")

    def tensor(self, other):
        return StateVector(
            self.num_qubits + other.num_qubits,
            np.kron(self.amplitudes, other.amplitudes),
        )

    def norm(self):
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def max_deviation(self, other):
        if self.num_qubits != other.num_qubits:
            raise ValueError("比较的两个态量子比特数不同")
        return float(np.max(np.abs(self.amplitudes - other.amplitudes)))

    def basis_bits(self):
        """若为计算基态（允许全局相位）返回其标签，否则返回 None。"""
        probs = self.probabilities()
        index = int(np.argmax(probs))
        if abs(probs[index] - 1.0) > ATOL:
            return None
        return format(index, f"0{self.num_qubits}b")

    def _tensor_view(self):
        return np.array(self.amplitudes).reshape((2,) * self.num_qubits)

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"


def _check_wires(wires, num_qubits):
    for wire in wires:
        if not 0 <= int(wire) < num_qubits:
            raise ValueError(f"量子比特下标 {wire} 越界 (共 {num_qubits} 个)")


def _check_qubit_list(qubits, num_qubits):
    qubits = [int(q) for q in qubits]
    if not qubits:
        raise ValueError("测量的量子比特列表为空")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"测量的量子比特下标重复: {qubits}")
    _check_wires(qubits, num_qubits)
    return qubits


def _apply_in_place(psi, gate):
    n = psi.ndim
    target = gate.target
    if gate.kind is GateKind.X:
        return np.flip(psi, axis=target).copy()
    if gate.kind is GateKind.Z:
        index = [slice(None)] * n
        index[target] = 1
        psi[tuple(index)] *= -1
        return psi
    if gate.kind is GateKind.H:
        a0 = psi.take(0, axis=target)
        a1 = psi.take(1, axis=target)
        return np.stack(((a0 + a1) * _SQRT2_INV, (a0 - a1) * _SQRT2_INV), axis=target)

    # CNOT：控制位为 1 的子块上沿目标轴翻转
    control = gate.control
    index = [slice(None)] * n
    index[control] = 1
    sub_axis = target if target < control else target - 1
    block = psi[tuple(index)]
    psi[tuple(index)] = np.flip(block, axis=sub_axis).copy()
    return psi


def apply_gate(state, gate):
    _check_wires(gate.wires, state.num_qubits)
    psi = _apply_in_place(state._tensor_view(), gate)
    return StateVector(state.num_qubits, psi.reshape(-1))


def apply_gates(state, gates):
    gates = list(gates)
    for gate in gates:
        _check_wires(gate.wires, state.num_qubits)
    psi = state._tensor_view()
    for gate in gates:
        psi = _apply_in_place(psi, gate)
    return StateVector(state.num_qubits, psi.reshape(-1))


def _rotate_to_z(psi, wire_bases):
    for wire, basis in wire_bases:
        if basis is Basis.X:
            psi = _apply_in_place(psi, h_gate(wire))
    return psi


def _marginal(psi, qubits):
    """按 qubits 给定顺序返回扁平化的边缘分布。"""
    probs = np.abs(psi) ** 2
    n = psi.ndim
    others = tuple(i for i in range(n) if i not in qubits)
    marg = probs.sum(axis=others) if others else probs
    ordered = sorted(qubits)
    marg = np.transpose(marg, [ordered.index(q) for q in qubits])
    return marg.reshape(-1)


def measurement_distribution(state, qubits, basis):
    """精确的 Born 概率，键为按 qubits 顺序拼接的比特串（X 基下 0 对应 +）。"""
    qubits = _check_qubit_list(qubits, state.num_qubits)
    psi = _rotate_to_z(state._tensor_view(), [(q, basis) for q in qubits])
    marg = _marginal(psi, qubits)
    width = len(qubits)
    return {
        format(i, f"0{width}b"): float(p)
        for i, p in enumerate(marg)
        if p > 1e-15
    }


def measure_in_bases(state, wire_bases, rng):
    """
    在各自的基下联合测量若干量子比特。
    wire_bases: [(wire, Basis), ...]；返回 (比特串, 坍缩后的态)。
    """
    wire_bases = [(int(w), b) for w, b in wire_bases]
    qubits = _check_qubit_list([w for w, _ in wire_bases], state.num_qubits)
    psi = _rotate_to_z(state._tensor_view(), wire_bases)

    marg = _marginal(psi, qubits)
    cumulative = np.cumsum(marg)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    index = min(index, len(marg) - 1)
    bits = format(index, f"0{len(qubits)}b")

    selector = [slice(None)] * psi.ndim
    for wire, bit in zip(qubits, bits):
        selector[wire] = int(bit)
    selector = tuple(selector)
    collapsed = np.zeros_like(psi)
    collapsed[selector] = psi[selector] / np.sqrt(marg[index])

    # 测量后再旋转回原基，X 基结果坍缩为 |+>/|->
    collapsed = _rotate_to_z(collapsed, wire_bases)
    return bits, StateVector(state.num_qubits, collapsed.reshape(-1))


def measure(state, qubits, basis, rng):
    return measure_in_bases(state, [(q, basis) for q in qubits], rng)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    dim: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.shape != (self.dim, self.dim):
            raise ValueError(f"密度矩阵形状 {entries.shape} 与维数 {self.dim} 不符")
        if np.max(np.abs(entries - entries.conj().T)) > ATOL:
            raise ValueError("密度矩阵不是厄米矩阵")
        trace = np.trace(entries)
        if abs(trace - 1.0) > ATOL:
            raise ValueError(f"密度矩阵的迹不为 1: {trace!r}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_state(cls, state):
        amps = state.amplitudes
        return cls(len(amps), np.outer(amps, amps.conj()))

    @classmethod
    def maximally_mixed(cls, dim):
        return cls(dim, np.eye(dim, dtype=complex) / dim)

    def max_deviation(self, other):
        other_entries = other.entries if isinstance(other, DensityMatrix) else np.asarray(other)
        return float(np.max(np.abs(self.entries - other_entries)))

    def trace_distance(self, other):
        eigenvalues = np.linalg.eigvalsh(self.entries - other.entries)
        return float(0.5 * np.sum(np.abs(eigenvalues)))


def average_density(weighted_states):
    """sum_i w_i |s_i><s_i|，权重非负且和为 1。"""
    weighted_states = list(weighted_states)
    if not weighted_states:
        raise ValueError("至少需要一个态")
    weights = np.array([float(w) for w, _ in weighted_states])
    if np.any(weights < 0):
        raise ValueError("权重不能为负")
    if abs(weights.sum() - 1.0) > ATOL:
        raise ValueError(f"权重之和必须为 1，实际为 {weights.sum()!r}")

    dims = {s.num_qubits for _, s in weighted_states}
    if len(dims) != 1:
        raise ValueError(f"混合的态量子比特数不一致: {sorted(dims)}")

    dim = 1 << dims.pop()
    rho = np.zeros((dim, dim), dtype=complex)
    for weight, state in weighted_states:
        amps = state.amplitudes
        rho += float(weight) * np.outer(amps, amps.conj())
    return DensityMatrix(dim, rho)


def reduced_density(state, keep):
    """对 keep 以外的量子比特求偏迹。"""
    keep = _check_qubit_list(keep, state.num_qubits)
    n = state.num_qubits
    others = [i for i in range(n) if i not in keep]
    psi = np.transpose(state._tensor_view(), keep + others)
    matrix = psi.reshape(1 << len(keep), 1 << len(others))
    return DensityMatrix(1 << len(keep), matrix @ matrix.conj().T)
