CONFIG_LABELS = {
    "q": "模数 q（集合取值范围 [0, q-1]，建议取素数）",
    "sets": "私有集合，每行一个 JSON 数组",
    "delta": "额外的密钥生成轮数，留空时自动计算",
    "test_fraction": "用于检验 TP 的轮次比例",
    "error_threshold": "测量关联违背率阈值",
    "channel_threshold": "诱骗光子误码率阈值",
    "adversary": "窃听策略 none / intercept-resend / entangle-measure",
    "f": "纠缠-测量攻击的 U_f 真值表 f(0),f(1)",
    "resend_basis": "截获-重发的测量基 random / Z / X",
    "decoys_per_message": "每条消息的诱骗光子数，留空时等于载荷长度",
    "seed": "随机种子",
    "shots": "统计实验的采样次数",
    "parallel": "并行线程数",
    "key_source": "k 与 kb 的来源 ideal / bb84",
    "multiplier": "固定的乘法密钥 k，留空时随机抽取",
    "runs": "连续运行的次数（种子依次递增）",
}

DEFAULT_CONFIG_VALUES = {
    "q": "5",
    "sets": "",
    "delta": "",
    "test_fraction": "1/8",
    "error_threshold": "0",
    "channel_threshold": "0",
    "adversary": "none",
    "f": "0,1",
    "resend_basis": "random",
    "decoys_per_message": "",
    "seed": "0",
    "shots": "2048",
    "parallel": "1",
    "key_source": "ideal",
    "multiplier": "",
    "runs": "1",
}

SEED_ENV_VAR = "QPSI_SEED"
DEFAULT_CONFIG_FILE = "QPSI.ini"

REPORT_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_PROTOCOL_ABORT = 3
EXIT_ORACLE_MISMATCH = 4

ADVERSARY_CHOICES = ("none", "intercept-resend", "entangle-measure")
FORMAT_CHOICES = ("json", "text")
