"""协议模拟器的异常定义。"""


class QPSIError(Exception):
    """所有模拟器异常的基类。"""


class ConfigError(QPSIError, ValueError):
    """配置或输入数据无效。"""


class NonInvertibleMultiplier(ConfigError):
    def __init__(self, k, q):
        super().__init__(f"乘法密钥 k={k} 与模数 q={q} 不互素，掩码会合并不同元素并破坏基数。")
        self.k = k
        self.q = q


class ModulusMismatch(ConfigError):
    def __init__(self, moduli):
        moduli = sorted(set(moduli))
        super().__init__(f"各私有集合的模数不一致: {moduli}")
        self.moduli = moduli


class ProtocolAbort(QPSIError):
    """
    协议在某个阶段中止。
    只携带阶段、原因和该阶段的报告，不携带任何部分基数结果。
    """

    def __init__(self, phase, reason, report=None):
        super().__init__(f"[{phase}] {reason}")
        self.phase = phase
        self.reason = reason
        self.report = dict(report or {})

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "phase": self.phase,
            "reason": self.reason,
            "report": self.report,
        }


class AbortEavesdropping(ProtocolAbort):
    pass


class AbortDishonestTP(ProtocolAbort):
    pass


class InsufficientKeyBits(ProtocolAbort):
    pass


class OracleMismatch(QPSIError):
    def __init__(self, protocol_result, oracle_result):
        super().__init__(
            f"协议输出 {tuple(protocol_result)} 与经典基准 {tuple(oracle_result)} 不一致。"
        )
        self.protocol_result = tuple(protocol_result)
        self.oracle_result = tuple(oracle_result)
