import json
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from qpsi.harness import experiments
from qpsi.harness.accounting import classical_oracle, qubit_efficiency
from qpsi.harness.batch_worker import BatchWorker, RunContext
from qpsi.harness.output_naming import OutputNamingMixin
from qpsi.harness.report import (
    build_run_report,
    dumps_canonical,
    export_xlsx,
    read_version_label,
    render_text,
    run_tables,
)
from qpsi.logic.channel import AdversaryKind, AdversaryStrategy
from qpsi.logic.encoding import PrivateSet
from qpsi.logic.errors import ConfigError
from qpsi.logic.run_config import RunConfig

EXAMPLE_SETS = [[1, 2, 3], [1, 2, 4]]


class TestAccounting:
    def test_oracle(self, worked_two_party_sets, worked_three_party_sets):
        assert classical_oracle(worked_two_party_sets) == (2, 4)
        assert classical_oracle(worked_three_party_sets) == (1, 5)
        assert classical_oracle([PrivateSet.from_values([], 5), PrivateSet.from_values([], 5)]) == (0, 0)

    def test_efficiency_formula(self):
        assert qubit_efficiency(5) == Fraction(5, 82)
        assert qubit_efficiency(5, 3) == Fraction(5, 162)
        assert qubit_efficiency(5, 4) == Fraction(5, 162)
        for q in (5, 7, 11, 13):
            assert qubit_efficiency(q, 2) == Fraction(q, 16 * q + 2)

    def test_efficiency_domain(self):
        with pytest.raises(ValueError):
            qubit_efficiency(1)
        with pytest.raises(ValueError):
            qubit_efficiency(5, 1)


class TestExperiments:
    def test_mixing_check(self):
        result, tables = experiments.mixing_check()
        assert result["max_deviation"] < 1e-12
        assert len(result["encrypted_states"]) == 8
        assert set(tables) == {"加密态", "Psi约化态"}

    def test_keygen_stats(self):
        result, _ = experiments.keygen_stats(RunConfig(q=5, shots=2048), np.random.default_rng(7))
        for setting in ("ZZ", "XX"):
            assert result["settings"][setting]["violations"] == 0
            assert sum(result["settings"][setting]["histogram"].values()) == 2048
        analysis = result["analysis"]
        assert analysis["key_shortfall_probability"] < 1e-9
        assert analysis["substitution_rejection_probability"] < 1 - 1e-6
        assert analysis["rounds_for_rejection"] > analysis["rounds"]

    def test_attack_sim(self):
        config = RunConfig(q=5, adversary=AdversaryStrategy(AdversaryKind.ENTANGLE_MEASURE, (0, 0)))
        result, _ = experiments.attack_sim(config, np.random.default_rng(1), decoys=4096)
        assert result["intercept_resend"]["exact"] == "1/4"
        assert 0.21 <= result["intercept_resend"]["sampled"] <= 0.29
        assert result["entangle_measure"]["exact"] == "0"
        assert result["entangle_measure"]["decoys_wrong"] == 0
        assert result["entangle_measure"]["information_gain"] < 1e-12

    def test_efficiency_table(self):
        result, tables = experiments.efficiency_table([5, 7], [2, 3])
        rows = {(r["q"], r["m"]): r for r in result["rows"]}
        assert rows[(5, 2)]["efficiency"] == "5/82"
        assert rows[(7, 3)]["core_qubits"] == 224
        assert len(tables["效率"]) == 4


class TestBatchWorker:
    def test_runs_keep_seed_order(self):
        config = RunConfig(q=5, sets=EXAMPLE_SETS, parallel=2)
        worker = BatchWorker([4, 5, 6], config)
        entries = worker.run()
        assert [e["seed"] for e in entries] == [4, 5, 6]
        assert all(e["oracle"]["agrees"] for e in entries)
        assert [seed for seed, _ in worker.results] == [4, 5, 6]

    def test_parallel_matches_sequential(self):
        sequential = BatchWorker([2, 3], RunConfig(q=5, sets=EXAMPLE_SETS)).run()
        parallel = BatchWorker([2, 3], RunConfig(q=5, sets=EXAMPLE_SETS, parallel=2)).run()
        assert sequential == parallel

    def test_abort_becomes_error_entry(self):
        config = RunConfig(q=5, sets=EXAMPLE_SETS, adversary=AdversaryStrategy(AdversaryKind.INTERCEPT_RESEND))
        entry, result = RunContext(config).process_item(1)
        assert result is None
        assert entry["error"]["error"] == "AbortEavesdropping"
        assert entry["error"]["phase"] == "keygen"

    def test_needs_two_sets(self):
        with pytest.raises(ConfigError):
            RunContext(RunConfig(q=5, sets=[[1]]))


class TestReport:
    def test_report_is_byte_identical_for_same_seed(self):
        config = RunConfig(q=5, sets=EXAMPLE_SETS, seed=7)
        texts = [dumps_canonical(build_run_report(config, BatchWorker([7], config).run())) for _ in range(2)]
        assert texts[0] == texts[1]
        report = json.loads(texts[0])
        assert report["result"]["intersection_cardinality"] == 2
        assert report["timing_ms"] is None
        assert report["efficiency"]["formula"] == "5/82"

    def test_multiple_runs_summary(self):
        config = RunConfig(q=5, sets=EXAMPLE_SETS, runs=2)
        report = build_run_report(config, BatchWorker([0, 1], config).run())
        assert report["oracle"] == {"runs": 2, "completed": 2, "aborted": 0, "agrees": True}
        assert "seed 1: 交集 2, 并集 4" in render_text(report)

    def test_xlsx_export(self, tmp_path):
        config = RunConfig(q=5, sets=EXAMPLE_SETS)
        worker = BatchWorker([0], config)
        entries = worker.run()
        path = export_xlsx(tmp_path / "out" / "run.xlsx", run_tables(entries, worker.results))
        summary = pd.read_excel(path, sheet_name="汇总", engine="openpyxl")
        assert summary.loc[0, "交集"] == 2
        membership = pd.read_excel(path, sheet_name="逐位分类", engine="openpyxl")
        assert len(membership) == 5

    def test_version_label(self, tmp_path):
        path = tmp_path / "version.ini"
        path.write_text("[version]\ncode = V1.0\nbuild_date = 20261018\n", encoding="utf-8")
        assert read_version_label(path) == "20261018-V1.0"
        assert read_version_label(tmp_path / "missing.ini") == ""


class NamedOutput(OutputNamingMixin):
    command = "run"

    def __init__(self, config):
        self.config = config


class TestOutputNaming:
    def test_sanitize(self):
        naming = NamedOutput(RunConfig(q=5))
        assert naming.sanitize_filename_component(" a/b:c ") == "a_b_c"
        assert naming.sanitize_filename_component("交集 结果") == "交集_结果"
        assert naming.sanitize_filename_component("///") == "未命名"

    def test_directory_gets_generated_name(self, tmp_path):
        config = RunConfig(q=5, sets=EXAMPLE_SETS, seed=3,
                           adversary=AdversaryStrategy(AdversaryKind.INTERCEPT_RESEND))
        path = NamedOutput(config).resolve_output_path(tmp_path, ".json")
        assert path == tmp_path / "run_q5_m2_seed3_intercept-resend.json"
        assert NamedOutput(config).resolve_output_path(None, ".json") is None
