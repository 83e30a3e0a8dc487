from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction

from qpsi.logic.channel import AdversaryStrategy
from qpsi.logic.config_values import (
    get_config_fraction,
    get_config_text,
    get_non_negative_config_int,
    get_optional_config_int,
    get_positive_config_int,
    parse_set_lines,
    parse_truth_table,
)
from qpsi.logic.encoding import KeySourceKind, PrivateSet
from qpsi.logic.errors import ConfigError
from qpsi.logic.qss_keygen import DEFAULT_TEST_FRACTION, KeygenConfig


@dataclass
class RunConfig:
    """一次（或一批）协议运行的全部参数。"""

    q: int = 5
    sets: list = field(default_factory=list)
    delta: int | None = None
    test_fraction: Fraction = DEFAULT_TEST_FRACTION
    error_threshold: Fraction = Fraction(0)
    channel_threshold: Fraction = Fraction(0)
    adversary: AdversaryStrategy = field(default_factory=AdversaryStrategy)
    decoys_per_message: int | None = None
    seed: int = 0
    shots: int = 2048
    parallel: int = 1
    key_source: KeySourceKind = KeySourceKind.IDEAL
    multiplier: int | None = None
    runs: int = 1

    def __post_init__(self):
        if int(self.q) < 2:
            raise ConfigError(f"q 必须 >= 2: {self.q}")
        if int(self.shots) < 1:
            raise ConfigError(f"shots 必须 >= 1: {self.shots}")
        if int(self.parallel) < 1:
            raise ConfigError(f"parallel 必须 >= 1: {self.parallel}")
        if int(self.runs) < 1:
            raise ConfigError(f"runs 必须 >= 1: {self.runs}")
        if self.decoys_per_message is not None and int(self.decoys_per_message) < 1:
            raise ConfigError("decoys_per_message 必须 >= 1，零个诱骗光子无法检测窃听")
        self.sets = [list(s) for s in self.sets]
        self.key_source = KeySourceKind(self.key_source)
        self.keygen_config()

    @classmethod
    def from_config_dict(cls, config):
        """由扁平的 key -> 文本 配置字典构造，解析失败抛出 ConfigError。"""
        adversary = AdversaryStrategy.from_name(
            get_config_text(config, "adversary") or "none",
            parse_truth_table(get_config_text(config, "f") or "0,1"),
            get_config_text(config, "resend_basis") or "random",
        )
        key_source = get_config_text(config, "key_source") or "ideal"
        try:
            key_source = KeySourceKind(key_source.lower())
        except ValueError:
            raise ConfigError(f"key_source 只能是 ideal 或 bb84: {key_source}")

        return cls(
            q=get_positive_config_int(config, "q", 5),
            sets=parse_set_lines(get_config_text(config, "sets")),
            delta=get_optional_config_int(config, "delta"),
            test_fraction=get_config_fraction(
                config, "test_fraction", DEFAULT_TEST_FRACTION, include_lower=False
            ),
            error_threshold=get_config_fraction(config, "error_threshold", 0),
            channel_threshold=get_config_fraction(config, "channel_threshold", 0),
            adversary=adversary,
            decoys_per_message=get_optional_config_int(config, "decoys_per_message", minimum=1),
            seed=get_non_negative_config_int(config, "seed", 0),
            shots=get_positive_config_int(config, "shots", 2048),
            parallel=get_positive_config_int(config, "parallel", 1),
            key_source=key_source,
            multiplier=get_optional_config_int(config, "multiplier", minimum=1),
            runs=get_positive_config_int(config, "runs", 1),
        )

    def keygen_config(self):
        return KeygenConfig(self.q, self.delta, self.test_fraction, self.error_threshold)

    def private_sets(self):
        """集合只在真正运行协议时按 q 校验，统计实验不读取集合。"""
        return [
            PrivateSet.from_values(values, self.q, f"第 {i + 1} 个集合")
            for i, values in enumerate(self.sets)
        ]

    def with_seed(self, seed):
        return dataclasses.replace(self, seed=int(seed))

    def to_dict(self):
        keygen = self.keygen_config()
        return {
            "q": self.q,
            "sets": [sorted(s) for s in self.sets],
            "delta": keygen.delta,
            "delta_source": "config" if self.delta is not None else "computed",
            "test_fraction": str(self.test_fraction),
            "error_threshold": str(self.error_threshold),
            "channel_threshold": str(self.channel_threshold),
            "adversary": self.adversary.to_dict(),
            "decoys_per_message": self.decoys_per_message,
            "seed": self.seed,
            "shots": self.shots,
            "parallel": self.parallel,
            "key_source": self.key_source.value,
            "multiplier": self.multiplier,
            "runs": self.runs,
        }
