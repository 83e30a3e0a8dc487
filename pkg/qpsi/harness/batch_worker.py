import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from qpsi.harness.output_naming import OutputNamingMixin
from qpsi.harness.report import abort_entry, run_entry
from qpsi.logic import ProtocolEngine
from qpsi.logic.errors import ConfigError, ProtocolAbort


class RunContext(OutputNamingMixin):
    command = "run"

    def __init__(self, config):
        self.config = config
        self.sets = config.private_sets()
        if len(self.sets) < 2:
            raise ConfigError(f"至少需要 2 个集合，实际为 {len(self.sets)}")

    def process_item(self, seed):
        """按给定种子运行一次协议，返回 (报告条目, ProtocolResult 或 None)。"""
        engine = ProtocolEngine(self.config.with_seed(seed))
        rng = np.random.default_rng(seed)

        try:
            if len(self.sets) == 2:
                result = engine.run_two_party(self.sets[0], self.sets[1], rng)
            else:
                result = engine.run_multi_party(self.sets, rng)
        except ProtocolAbort as exc:
            logging.error(f"seed={seed} 协议中止: {exc}")
            return abort_entry(seed, exc), None

        entry = run_entry(seed, self.sets, result)
        oracle = entry["oracle"]
        if oracle["agrees"]:
            logging.info(f"seed={seed} 与经典基准一致: {result.cardinalities}")
        else:
            logging.error(
                f"seed={seed} 协议输出 {result.cardinalities} 与经典基准 "
                f"({oracle['intersection_cardinality']}, {oracle['union_cardinality']}) 不一致"
            )
        return entry, result


class BatchWorker:
    """依次（或按 parallel 并发）处理一组种子，条目顺序始终与种子顺序一致。"""

    def __init__(self, items, config):
        self.items = list(items)
        self.parallel = config.parallel
        # 并发发生在种子之间时，组内不再开线程
        if self.parallel > 1 and len(self.items) > 1:
            config = dataclasses.replace(config, parallel=1)
        self.context = RunContext(config)
        self.entries = []
        self.results = []

    def _collect(self, seed, output):
        entry, result = output
        self.entries.append(entry)
        if result is not None:
            self.results.append((seed, result))

    def run(self):
        total = len(self.items)
        if self.parallel > 1 and total > 1:
            with ThreadPoolExecutor(max_workers=min(self.parallel, total)) as pool:
                outputs = list(pool.map(self.context.process_item, self.items))
        else:
            outputs = [self.context.process_item(seed) for seed in self.items]

        for index, (seed, output) in enumerate(zip(self.items, outputs)):
            self._collect(seed, output)
            logging.info(f"批量运行进度 {index + 1}/{total}")
        return self.entries
