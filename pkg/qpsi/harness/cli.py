"""命令行入口：run、keygen-stats、mixing-check、attack-sim、efficiency、show-config。"""

import functools
import logging
import sys
import time

import click
import numpy as np

from qpsi.harness import experiments
from qpsi.harness.batch_worker import BatchWorker
from qpsi.harness.config_loader import ConfigLoader
from qpsi.harness.config_schema import (
    ADVERSARY_CHOICES,
    EXIT_CONFIG_ERROR,
    EXIT_ORACLE_MISMATCH,
    EXIT_PROTOCOL_ABORT,
    FORMAT_CHOICES,
)
from qpsi.harness.output_naming import OutputNamingMixin
from qpsi.harness.report import (
    build_experiment_report,
    build_run_report,
    dumps_canonical,
    export_xlsx,
    read_version_label,
    render_text,
    run_tables,
    write_text,
)
from qpsi.logic.config_values import parse_int_list
from qpsi.logic.errors import ConfigError, OracleMismatch
from qpsi.logic.run_config import RunConfig

_LOG_HANDLERS = []


def setup_logging(log_file=None, verbose=False):
    root = logging.getLogger()
    console_level = logging.INFO if verbose else logging.WARNING
    root.setLevel(logging.INFO if (verbose or log_file) else logging.WARNING)

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(console_level)
    console.setFormatter(logging.Formatter('%(asctime)s - %(message)s'))
    root.addHandler(console)
    _LOG_HANDLERS.append(console)

    if log_file:
        file_handler = logging.FileHandler(log_file, mode='a', encoding='utf-8')
        file_handler.setLevel(logging.INFO)
        file_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
        root.addHandler(file_handler)
        _LOG_HANDLERS.append(file_handler)


def cleanup_logging():
    root = logging.getLogger()
    while _LOG_HANDLERS:
        handler = _LOG_HANDLERS.pop()
        root.removeHandler(handler)
        handler.close()


class OutputTarget(OutputNamingMixin):
    def __init__(self, command, config):
        self.command = command
        self.config = config


# 命令行参数名 -> 配置键
OPTION_KEYS = {
    "q": "q",
    "delta": "delta",
    "test_fraction": "test_fraction",
    "threshold": "error_threshold",
    "channel_threshold": "channel_threshold",
    "adversary": "adversary",
    "f": "f",
    "resend_basis": "resend_basis",
    "decoys_per_message": "decoys_per_message",
    "seed": "seed",
    "shots": "shots",
    "parallel": "parallel",
    "key_source": "key_source",
    "multiplier": "multiplier",
    "runs": "runs",
}


def common_options(func):
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="INI 配置文件，默认读取当前目录的 QPSI.ini"),
        click.option("--q", type=int, default=None, help="模数 q"),
        click.option("--sets", multiple=True, help="私有集合，JSON 数组，可连续给出多个"),
        click.option("--sets-file", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="集合文件，每行一个 JSON 数组"),
        click.option("--delta", type=int, default=None, help="额外密钥生成轮数"),
        click.option("--test-fraction", default=None, help="检验轮比例，如 1/8"),
        click.option("--threshold", default=None, help="测量关联违背率阈值"),
        click.option("--channel-threshold", default=None, help="诱骗光子误码率阈值"),
        click.option("--adversary", type=click.Choice(ADVERSARY_CHOICES), default=None, help="窃听策略"),
        click.option("--f", default=None, help="U_f 真值表 'f(0),f(1)'"),
        click.option("--resend-basis", type=click.Choice(["random", "Z", "X"]), default=None,
                     help="截获-重发的测量基"),
        click.option("--decoys-per-message", type=int, default=None, help="每条消息的诱骗光子数"),
        click.option("--seed", type=int, default=None, help="随机种子（也可用 QPSI_SEED）"),
        click.option("--shots", type=int, default=None, help="统计实验采样次数"),
        click.option("--parallel", type=int, default=None, help="并行线程数"),
        click.option("--key-source", type=click.Choice(["ideal", "bb84"]), default=None, help="k 与 kb 的来源"),
        click.option("--multiplier", type=int, default=None, help="固定乘法密钥 k"),
        click.option("--runs", type=int, default=None, help="运行次数，种子依次加 1"),
        click.option("--report", "report_path", type=click.Path(), default=None,
                     help="报告输出路径（目录时自动命名），默认输出到标准输出"),
        click.option("--format", "output_format", type=click.Choice(FORMAT_CHOICES), default="json",
                     show_default=True, help="报告格式"),
        click.option("--xlsx", "xlsx_path", type=click.Path(), default=None, help="另存 Excel 表格"),
        click.option("--timing", is_flag=True, default=False, help="在报告中记录耗时（报告不再逐字节可复现）"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def load_flat_config(options, extra_sets=(), loader=None):
    loader = loader or ConfigLoader()
    cli_values = {key: options.get(name) for name, key in OPTION_KEYS.items()}

    set_lines = list(options.get("sets") or ()) + list(extra_sets)
    if options.get("sets_file"):
        set_lines.append(loader.read_text(options["sets_file"]))
    if set_lines:
        cli_values["sets"] = "\n".join(set_lines)

    return loader.load(options.get("config_path"), cli_values)


def load_run_config(options, extra_sets=()):
    return RunConfig.from_config_dict(load_flat_config(options, extra_sets))


def emit_report(target, report, options):
    text = render_text(report) if options["output_format"] == "text" else dumps_canonical(report)
    extension = ".txt" if options["output_format"] == "text" else ".json"
    path = target.resolve_output_path(options.get("report_path"), extension)
    if path is None:
        click.echo(text, nl=False)
    else:
        write_text(path, text)


def guarded(func):
    """把配置错误统一转换为退出码 2。"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigError as e:
            logging.error(f"配置错误: {e}")
            click.echo(f"配置错误: {e}", err=True)
            sys.exit(EXIT_CONFIG_ERROR)

    return wrapper


@click.group()
@click.version_option(version=read_version_label() or "unknown", prog_name="qpsi")
@click.option("--log-file", type=click.Path(dir_okay=False), default=None, help="追加写入的日志文件")
@click.option("--verbose", "-v", is_flag=True, default=False, help="在标准错误输出显示运行日志")
@click.pass_context
def main(ctx, log_file, verbose):
    """量子同态加密隐私集合交集/并集基数协议模拟器。"""
    setup_logging(log_file, verbose)
    ctx.call_on_close(cleanup_logging)


@main.command()
@common_options
@click.argument("extra_sets", nargs=-1)
@guarded
def run(extra_sets, **options):
    """端到端运行协议并与经典基准比较。"""
    config = load_run_config(options, extra_sets)
    target = OutputTarget("run", config)
    seeds = [config.seed + i for i in range(config.runs)]

    start = time.perf_counter()
    worker = BatchWorker(seeds, config)
    entries = worker.run()
    timing_ms = round((time.perf_counter() - start) * 1000, 3) if options["timing"] else None

    report = build_run_report(config, entries, timing_ms)
    emit_report(target, report, options)
    xlsx_path = target.resolve_output_path(options.get("xlsx_path"), ".xlsx")
    if xlsx_path is not None:
        export_xlsx(xlsx_path, run_tables(entries, worker.results))

    if any("error" in entry for entry in entries):
        sys.exit(EXIT_PROTOCOL_ABORT)
    for seed, result in worker.results:
        entry = next(e for e in entries if e["seed"] == seed)
        oracle = entry["oracle"]
        if not oracle["agrees"]:
            mismatch = OracleMismatch(
                result.cardinalities,
                (oracle["intersection_cardinality"], oracle["union_cardinality"]),
            )
            logging.error(f"seed={seed}: {mismatch}")
            click.echo(str(mismatch), err=True)
            sys.exit(EXIT_ORACLE_MISMATCH)


def _run_experiment(command, options, extra_sets, compute):
    config = load_run_config(options, extra_sets)
    target = OutputTarget(command, config)
    start = time.perf_counter()
    result, tables = compute(config, np.random.default_rng(config.seed))
    timing_ms = round((time.perf_counter() - start) * 1000, 3) if options["timing"] else None

    emit_report(target, build_experiment_report(command, config, result, timing_ms), options)
    xlsx_path = target.resolve_output_path(options.get("xlsx_path"), ".xlsx")
    if xlsx_path is not None:
        export_xlsx(xlsx_path, tables)


@main.command("keygen-stats")
@common_options
@click.argument("extra_sets", nargs=-1)
@guarded
def keygen_stats(extra_sets, **options):
    """|Psi> 在 Z-Z 与 X-X 设置下的测量统计及轮数分析。"""
    _run_experiment("keygen-stats", options, extra_sets, experiments.keygen_stats)


@main.command("mixing-check")
@common_options
@click.argument("extra_sets", nargs=-1)
@guarded
def mixing_check(extra_sets, **options):
    """检查密钥平均后的加密态是否为最大混合态。"""
    _run_experiment("mixing-check", options, extra_sets, lambda config, rng: experiments.mixing_check())


@main.command("attack-sim")
@common_options
@click.argument("extra_sets", nargs=-1)
@click.option("--decoys", type=int, default=4096, show_default=True, help="采样的诱骗光子数")
@guarded
def attack_sim(extra_sets, decoys, **options):
    """截获-重发与纠缠-测量攻击的精确与采样检出率。"""
    if decoys < 1:
        raise ConfigError("--decoys 必须 >= 1")
    _run_experiment(
        "attack-sim", options, extra_sets,
        lambda config, rng: experiments.attack_sim(config, rng, decoys),
    )


@main.command()
@common_options
@click.argument("extra_sets", nargs=-1)
@click.option("--qs", default=None, help="模数列表，如 5,7,11；默认取 --q")
@click.option("--ms", default="2", show_default=True, help="参与方数列表，如 2,3,4,5")
@guarded
def efficiency(extra_sets, qs, ms, **options):
    """量子比特效率公式表。"""

    def compute(config, rng):
        q_values = parse_int_list(qs, "--qs") if qs else [config.q]
        m_values = parse_int_list(ms, "--ms")
        if any(q < 2 for q in q_values) or any(m < 2 for m in m_values):
            raise ConfigError("q 和 m 都必须 >= 2")
        return experiments.efficiency_table(q_values, m_values)

    _run_experiment("efficiency", options, extra_sets, compute)


@main.command("show-config")
@common_options
@click.argument("extra_sets", nargs=-1)
@guarded
def show_config(extra_sets, **options):
    """列出合并后的有效配置及各项说明。"""
    loader = ConfigLoader()
    flat_dict = load_flat_config(options, extra_sets, loader)
    RunConfig.from_config_dict(flat_dict)
    for key in loader.DEFAULT_CONFIG_VALUES:
        value = " ".join(flat_dict[key].splitlines()) or "（空）"
        click.echo(f"{loader.get_config_display_label(key)} {value}")


if __name__ == "__main__":
    main()
