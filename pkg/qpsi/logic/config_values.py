import json
from fractions import Fraction

from qpsi.logic.errors import ConfigError


def get_config_text(config, key):
    return str(config.get(key, "") or "").strip().strip("'").strip('"')


def get_positive_config_int(config, key, default):
    text = get_config_text(config, key)
    try:
        value = int(text) if text else int(default)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} 必须是大于 0 的整数")

    if value <= 0:
        raise ConfigError(f"{key} 必须是大于 0 的整数")
    return value


def get_non_negative_config_int(config, key, default=0):
    text = get_config_text(config, key)
    try:
        value = int(text) if text else int(default)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} 必须是大于等于 0 的整数")

    if value < 0:
        raise ConfigError(f"{key} 必须是大于等于 0 的整数")
    return value


def get_optional_config_int(config, key, minimum=0):
    """留空时返回 None。"""
    text = get_config_text(config, key)
    if not text:
        return None
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"{key} 必须是整数或留空")
    if value < minimum:
        raise ConfigError(f"{key} 必须大于等于 {minimum}")
    return value


def get_config_fraction(config, key, default, lower=0, upper=1, include_lower=True, include_upper=False):
    """解析有理数配置，支持 '1/8'、'0.125' 两种写法。"""
    text = get_config_text(config, key) or str(default)
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key} 必须是有理数，如 1/8 或 0.125")

    low_ok = value >= lower if include_lower else value > lower
    high_ok = value <= upper if include_upper else value < upper
    if not (low_ok and high_ok):
        left = "[" if include_lower else "("
        right = "]" if include_upper else ")"
        raise ConfigError(f"{key}={text} 超出范围 {left}{lower}, {upper}{right}")
    return value


def parse_int_list(text, name="集合"):
    """解析 JSON 整数数组，如 '[1,2,3]'；也接受逗号/空格分隔的写法。"""
    text = str(text or "").strip()
    if not text:
        return []
    if text.startswith("["):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{name} 不是合法的 JSON 数组: {text} ({e.msg})")
        if not isinstance(values, list):
            raise ConfigError(f"{name} 必须是 JSON 数组: {text}")
    else:
        values = text.replace(";", " ").replace(",", " ").split()

    result = []
    for value in values:
        if isinstance(value, bool):
            raise ConfigError(f"{name} 只能包含整数: {text}")
        try:
            number = int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} 只能包含整数: {text}")
        if isinstance(value, float) and value != number:
            raise ConfigError(f"{name} 只能包含整数: {text}")
        result.append(number)
    return result


def parse_set_lines(text):
    """解析集合文件：整个文件是 JSON 二维数组，或每行一个 JSON 数组。"""
    text = str(text or "").strip()
    if not text:
        return []
    if text.startswith("[["):
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"集合文件不是合法的 JSON: {e.msg}")
        return [parse_int_list(json.dumps(row), f"第 {i + 1} 个集合") for i, row in enumerate(rows)]

    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append(parse_int_list(line, f"第 {len(rows) + 1} 个集合"))
    return rows


def parse_truth_table(text, key="f"):
    """解析 U_f 真值表 'f(0),f(1)'，如 '0,1'。"""
    parts = str(text or "").replace(" ", "").split(",")
    if len(parts) != 2 or any(p not in ("0", "1") for p in parts):
        raise ConfigError(f"{key} 必须写成 'f(0),f(1)'，取值 0 或 1，如 0,1")
    return int(parts[0]), int(parts[1])
