"""
统计实验：密钥生成的测量分布、加密态的最大混合、窃听检出率与资源效率表。
每个实验返回可直接写入报告的字典，以及用于 Excel 导出的 DataFrame。
"""

import logging
from fractions import Fraction
from itertools import product

import pandas as pd
from scipy import stats

from qpsi.harness.accounting import qubit_efficiency
from qpsi.logic.channel import (
    AdversaryKind,
    AdversaryStrategy,
    Eavesdropper,
    QuantumMemory,
    ancilla_information_gain,
    build_message,
    entangle_measure_detection_probability,
    insert_decoys,
    intercept_resend_detection_probability,
    transmit,
    verify_decoys,
)
from qpsi.logic.pauli_qotp import PauliKey, encrypt
from qpsi.logic.qss_keygen import (
    key_shortfall_probability,
    prepare_psi,
    rejection_probability,
    rounds_for_rejection,
    sample_rounds,
    verify_table1,
)
from qpsi.logic.resources import expected_core_qubits
from qpsi.logic.statevector import (
    Basis,
    DensityMatrix,
    StateVector,
    average_density,
    reduced_density,
    to_basis_labels,
)

UNIFORMITY_ALPHA = 0.001
SUBSTITUTION_VIOLATION = 0.1
SUBSTITUTION_TARGET = 1e-6


def _round_label(round_):
    bits = f"{round_.tp_outcome}{round_.alice_outcome}{round_.bob_outcome}"
    return bits[0] + to_basis_labels(bits[1], round_.alice_basis) + to_basis_labels(bits[2], round_.bob_basis)


def keygen_stats(config, rng):
    """Z-Z 与 X-X 两种设置下各采样 shots 轮 |Psi> 的测量结果。"""
    psi = prepare_psi()
    settings = {}
    tables = {}
    for name, basis in (("ZZ", Basis.Z), ("XX", Basis.X)):
        rounds = sample_rounds(config.shots, rng, psi, basis, basis)
        histogram = {}
        for round_ in rounds:
            label = _round_label(round_)
            histogram[label] = histogram.get(label, 0) + 1
        violations = sum(1 for r in rounds if not verify_table1(r))

        marginals = {}
        for party in ("tp", "alice", "bob"):
            ones = sum(getattr(r, f"{party}_outcome") for r in rounds)
            observed = [config.shots - ones, ones]
            pvalue = float(stats.chisquare(observed).pvalue)
            marginals[party] = {
                "counts": observed,
                "pvalue": pvalue,
                "uniform": pvalue >= UNIFORMITY_ALPHA,
            }
        settings[name] = {
            "shots": config.shots,
            "histogram": dict(sorted(histogram.items())),
            "violations": violations,
            "marginals": marginals,
        }
        tables[f"{name}直方图"] = pd.DataFrame(
            {"结果": list(settings[name]["histogram"]), "次数": list(settings[name]["histogram"].values())}
        )
        logging.info(f"{name} 设置采样 {config.shots} 轮，测量关联违背 {violations} 次")

    keygen = config.keygen_config()
    analysis = {
        "q": keygen.q,
        "rounds": keygen.rounds,
        "delta": keygen.delta,
        "test_rounds": keygen.test_rounds,
        "key_shortfall_probability": key_shortfall_probability(keygen.q, keygen.delta, keygen.test_fraction),
        "substitution_violation": SUBSTITUTION_VIOLATION,
        "substitution_rejection_probability": rejection_probability(
            SUBSTITUTION_VIOLATION, keygen.rounds, keygen.test_fraction, keygen.error_threshold
        ),
        "rounds_for_rejection": rounds_for_rejection(
            SUBSTITUTION_VIOLATION, SUBSTITUTION_TARGET, keygen.test_fraction, keygen.error_threshold
        ),
    }
    return {"settings": settings, "analysis": analysis}, tables


def _basis_states(num_qubits):
    return ["".join(bits) for bits in product("01", repeat=num_qubits)]


def key_averaged_density(bits, z_keys=True):
    """对所有 Pauli 密钥取平均后的加密态密度矩阵；z_keys=False 时只用 X 密钥。"""
    state = StateVector.from_bits(bits)
    n = state.num_qubits
    key_bits = (0, 1) if z_keys else (0,)
    keysets = [
        [PauliKey(a, b) for a, b in pairs]
        for pairs in product(product((0, 1), key_bits), repeat=n)
    ]
    weight = Fraction(1, len(keysets))
    return average_density((weight, encrypt(state, keys, range(n))) for keys in keysets)


def mixing_check():
    maximally_mixed = DensityMatrix.maximally_mixed(4)
    rows = []
    for bits in _basis_states(2):
        for label, z_keys in (("X^a Z^b", True), ("X^a", False)):
            rho = key_averaged_density(bits, z_keys)
            rows.append({
                "state": bits,
                "keys": label,
                "max_deviation": rho.max_deviation(maximally_mixed),
            })

    # |Psi> 任一量子比特的约化态都是 I/2
    psi = prepare_psi()
    half_mixed = DensityMatrix.maximally_mixed(2)
    psi_rows = [
        {"wire": wire, "max_deviation": reduced_density(psi, [wire]).max_deviation(half_mixed)}
        for wire in range(3)
    ]
    worst = max(row["max_deviation"] for row in rows + psi_rows)
    logging.info(f"最大混合检查完成，最大偏差 {worst:.3e}")
    result = {"encrypted_states": rows, "psi_reduced": psi_rows, "max_deviation": worst}
    return result, {"加密态": pd.DataFrame(rows), "Psi约化态": pd.DataFrame(psi_rows)}


def sample_detection_rate(strategy, count, rng):
    memory = QuantumMemory()
    plan = insert_decoys(0, count, rng)
    msg = build_message(memory, [], plan, "sender", "receiver")
    transmit(msg, Eavesdropper(strategy), rng)
    report, _ = verify_decoys(msg, plan, rng)
    return report


def attack_sim(config, rng, decoys=4096):
    f = config.adversary.f
    intercept = AdversaryStrategy(AdversaryKind.INTERCEPT_RESEND, resend_basis=config.adversary.resend_basis)
    entangle = AdversaryStrategy(AdversaryKind.ENTANGLE_MEASURE, f)

    basis_weights = None
    if intercept.resend_basis != "random":
        basis_weights = {Basis(intercept.resend_basis): Fraction(1)}
    ir_exact = intercept_resend_detection_probability(basis_weights)
    ir_report = sample_detection_rate(intercept, decoys, rng)
    em_exact = entangle_measure_detection_probability(f)
    em_x_exact = entangle_measure_detection_probability(f, ("+", "-"))
    em_report = sample_detection_rate(entangle, decoys, rng)
    gain = ancilla_information_gain(f)

    result = {
        "decoys": decoys,
        "intercept_resend": {
            "resend_basis": intercept.resend_basis,
            "exact": str(ir_exact),
            "exact_value": float(ir_exact),
            "sampled": float(ir_report.error_rate),
            "decoys_wrong": ir_report.decoys_wrong,
        },
        "entangle_measure": {
            "f": list(f),
            "error_free": entangle.is_error_free,
            "exact": str(em_exact),
            "exact_x_basis": str(em_x_exact),
            "sampled": float(em_report.error_rate),
            "decoys_wrong": em_report.decoys_wrong,
            "information_gain": gain,
        },
    }
    logging.info(
        f"截获-重发检出率 精确 {float(ir_exact):.4f} / 采样 {float(ir_report.error_rate):.4f}；"
        f"纠缠-测量 f={f} 检出率 {float(em_exact):.4f}，信息增益 {gain:.3e}"
    )
    table = pd.DataFrame([
        {"攻击": "intercept-resend", "精确检出率": float(ir_exact), "采样检出率": float(ir_report.error_rate)},
        {"攻击": "entangle-measure", "精确检出率": float(em_exact), "采样检出率": float(em_report.error_rate)},
    ])
    return result, {"检出率": table}


def efficiency_table(qs, ms):
    rows = []
    for q in qs:
        for m in ms:
            eta = qubit_efficiency(q, m)
            rows.append({
                "q": q,
                "m": m,
                "core_qubits": expected_core_qubits(q, m),
                "efficiency": str(eta),
                "efficiency_value": float(eta),
            })
    return {"rows": rows}, {"效率": pd.DataFrame(rows)}

