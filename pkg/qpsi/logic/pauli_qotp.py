"""
Pauli 一次一密：逐比特密钥 X^a Z^b、加解密算子以及 CNOT 的密钥更新规则。

协议路径中只使用 X 部分（b = 0），完整的 X^a Z^b 演算保留用于同态恒等式检查。
"""

from __future__ import annotations

from dataclasses import dataclass

from qpsi.logic.statevector import apply_gates, x_gate, z_gate


def _bit(value, name):
    if value not in (0, 1) or isinstance(value, bool):
        raise ValueError(f"{name} 必须是比特 0 或 1，实际为 {value!r}")
    return int(value)


@dataclass(frozen=True)
class PauliKey:
    a: int = 0
    b: int = 0

    def __post_init__(self):
        _bit(self.a, "a")
        _bit(self.b, "b")


@dataclass(frozen=True)
class KeyPair2:
    """一个编码项两个量子比特上的 X 指数 (alpha_j, beta_j)。"""

    alpha: int
    beta: int

    def __post_init__(self):
        _bit(self.alpha, "alpha")
        _bit(self.beta, "beta")

    def as_pauli_keys(self):
        return [PauliKey(self.alpha, 0), PauliKey(self.beta, 0)]

    def __xor__(self, other):
        return KeyPair2(self.alpha ^ other.alpha, self.beta ^ other.beta)


@dataclass(frozen=True)
class DecryptionKey:
    zeta: str
    eta: str

    def __post_init__(self):
        if len(self.zeta) != len(self.eta):
            raise ValueError("zeta 与 eta 长度必须相同")
        if any(c not in "01" for c in self.zeta + self.eta):
            raise ValueError("zeta/eta 只能包含 0 和 1")

    @classmethod
    def from_keys(cls, keys):
        return cls("".join(str(k.a) for k in keys), "".join(str(k.b) for k in keys))

    def as_pauli_keys(self):
        return [PauliKey(int(a), int(b)) for a, b in zip(self.zeta, self.eta)]


def _check_key_wires(keys, wires):
    keys = list(keys)
    wires = list(wires)
    if len(keys) != len(wires):
        raise ValueError(f"密钥数 {len(keys)} 与线路数 {len(wires)} 不一致")
    return keys, wires


def encrypt(state, keys, wires):
    """在每条线路上施加 X^a Z^b（先 Z^b 后 X^a）。"""
    keys, wires = _check_key_wires(keys, wires)
    gates = []
    for key, wire in zip(keys, wires):
        if key.b:
            gates.append(z_gate(wire))
        if key.a:
            gates.append(x_gate(wire))
    return apply_gates(state, gates) if gates else state


def decrypt_pauli(state, keys, wires):
    """(X^a Z^b)^dagger = Z^b X^a：先撤销 X 再撤销 Z。"""
    keys, wires = _check_key_wires(keys, wires)
    gates = []
    for key, wire in zip(keys, wires):
        if key.a:
            gates.append(x_gate(wire))
        if key.b:
            gates.append(z_gate(wire))
    return apply_gates(state, gates) if gates else state


def cnot_key_update(control_key, target_key):
    """CNOT 之后的密钥：控制位 (a_c, b_c^b_t)，目标位 (a_c^a_t, b_t)。"""
    return (
        PauliKey(control_key.a, control_key.b ^ target_key.b),
        PauliKey(control_key.a ^ target_key.a, target_key.b),
    )


def derive_tp_decryption_key(xor_alpha, xor_beta):
    """
    TP 只持有 alpha^A xor alpha^B 与 beta^A xor beta^B，
    调用方必须显式传入异或值，单个用户的密钥不会出现在这里。
    """
    return KeyPair2(_bit(xor_alpha, "xor_alpha"), _bit(xor_beta, "xor_beta"))


def decrypt(state, sk, wires):
    wires = list(wires)
    if len(wires) != 2:
        raise ValueError(f"解密需要恰好 2 条目标线路，实际为 {len(wires)}")
    gates = []
    if sk.alpha:
        gates.append(x_gate(wires[0]))
    if sk.beta:
        gates.append(x_gate(wires[1]))
    return apply_gates(state, gates) if gates else state
