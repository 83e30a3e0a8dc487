"""
报告的组装与输出：规范化 JSON（键排序，相同配置逐字节相同）、文本摘要和 Excel。
"""

import configparser
import json
import logging
from pathlib import Path

import pandas as pd

from qpsi.harness.accounting import classical_oracle, efficiency_summary
from qpsi.harness.config_schema import REPORT_SCHEMA_VERSION

PROJECT_ROOT = Path(__file__).resolve().parents[2]


def read_version_label(version_path=None):
    version_path = Path(version_path) if version_path else PROJECT_ROOT / "version.ini"
    if not version_path.exists():
        return ""

    parser = configparser.ConfigParser()
    try:
        parser.read(version_path, encoding="utf-8")
    except configparser.Error as e:
        logging.warning(f"读取 version.ini 失败: {e}")
        return ""

    version = parser["version"] if parser.has_section("version") else parser.defaults()
    build_date = version.get("build_date", "").strip()
    code = version.get("code", "").strip()
    return "-".join(part for part in [build_date, code] if part)


def oracle_block(sets, result):
    expected = classical_oracle(sets)
    return {
        "intersection_cardinality": expected[0],
        "union_cardinality": expected[1],
        "agrees": tuple(result.cardinalities) == expected,
    }


def run_entry(seed, sets, result):
    return {
        "seed": seed,
        "result": {
            "intersection_cardinality": result.intersection_cardinality,
            "union_cardinality": result.union_cardinality,
            "party_count": result.party_count,
            "groups": ["-".join(g) for g in result.groups],
        },
        "counts": result.counts.to_dict(),
        "keygen_report": {"groups": [r.to_dict() for r in result.keygen_reports]},
        "channel_reports": [r.to_dict() for r in result.channel_reports],
        "resources": result.resources.to_dict(),
        "efficiency": efficiency_summary(result),
        "oracle": oracle_block(sets, result),
        "transcript": result.transcript.to_list(),
    }


def abort_entry(seed, abort):
    return {"seed": seed, "error": abort.to_dict()}


def build_run_report(config, entries, timing_ms=None):
    """单次运行时把该次的各块提到顶层；多次运行时放在 runs 列表里。"""
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "generator": read_version_label(),
        "config": config.to_dict(),
        "timing_ms": timing_ms,
    }
    if len(entries) == 1:
        entry = dict(entries[0])
        entry.pop("seed", None)
        report.update(entry)
        return report

    report["runs"] = list(entries)
    completed = [e for e in entries if "oracle" in e]
    report["oracle"] = {
        "runs": len(entries),
        "completed": len(completed),
        "aborted": len(entries) - len(completed),
        "agrees": all(e["oracle"]["agrees"] for e in completed),
    }
    return report


def build_experiment_report(command, config, result, timing_ms=None):
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "generator": read_version_label(),
        "command": command,
        "config": config.to_dict(),
        "result": result,
        "timing_ms": timing_ms,
    }


def dumps_canonical(report):
    return json.dumps(report, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def _text_lines(block, indent=0):
    pad = "  " * indent
    lines = []
    for key in sorted(block):
        value = block[key]
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.extend(_text_lines(value, indent + 1))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            lines.append(f"{pad}{key}: {len(value)} 项")
        else:
            lines.append(f"{pad}{key}: {value}")
    return lines


def render_text(report):
    """人读的摘要；省略逐条的传输记录。"""
    summary = {k: v for k, v in report.items() if k not in ("transcript", "runs")}
    lines = _text_lines(summary)
    for entry in report.get("runs", []):
        if "error" in entry:
            lines.append(f"seed {entry['seed']}: 中止 [{entry['error']['phase']}] {entry['error']['reason']}")
        else:
            result = entry["result"]
            lines.append(
                f"seed {entry['seed']}: 交集 {result['intersection_cardinality']}, "
                f"并集 {result['union_cardinality']}, 与基准一致 {entry['oracle']['agrees']}"
            )
    return "\n".join(lines) + "\n"


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logging.info(f"报告已保存: {path}")
    return path


def export_xlsx(path, tables):
    """每个 DataFrame 一个工作表。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with pd.ExcelWriter(path, engine="openpyxl") as writer:
            for sheet, frame in tables.items():
                frame.to_excel(writer, sheet_name=str(sheet)[:31], index=False)
        logging.info(f"保存 Excel: {path}")
    except Exception as e:
        logging.error(f"保存 Excel {path} 失败: {e}")
        raise
    return path


def run_tables(entries, results):
    """运行结果的 Excel 表：汇总、逐位分类、信道报告。"""
    summary_rows = []
    for entry in entries:
        row = {"seed": entry["seed"]}
        if "error" in entry:
            row.update({"状态": "中止", "阶段": entry["error"]["phase"], "原因": entry["error"]["reason"]})
        else:
            row.update({
                "状态": "完成",
                "交集": entry["result"]["intersection_cardinality"],
                "并集": entry["result"]["union_cardinality"],
                "与基准一致": entry["oracle"]["agrees"],
                **{f"{k}": v for k, v in entry["counts"].items()},
            })
        summary_rows.append(row)

    tables = {"汇总": pd.DataFrame(summary_rows)}
    membership_rows = []
    channel_rows = []
    for seed, result in results:
        for row in result.membership_rows():
            membership_rows.append({"seed": seed, **row})
        for report in result.channel_reports:
            channel_rows.append({"seed": seed, **report.to_dict()})
    if membership_rows:
        tables["逐位分类"] = pd.DataFrame(membership_rows)
    if channel_rows:
        tables["信道检测"] = pd.DataFrame(channel_rows)
    return tables
