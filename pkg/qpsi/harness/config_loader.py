import configparser
import logging
import os

from qpsi.harness.config_schema import (
    CONFIG_LABELS,
    DEFAULT_CONFIG_FILE,
    DEFAULT_CONFIG_VALUES,
    SEED_ENV_VAR,
)
from qpsi.logic.errors import ConfigError


class ConfigLoader:
    CONFIG_LABELS = CONFIG_LABELS
    DEFAULT_CONFIG_VALUES = DEFAULT_CONFIG_VALUES

    def __init__(self):
        self.current_encoding = "utf-8-sig"

    def read_text(self, path):
        for encoding in ("utf-8-sig", "gb18030"):
            try:
                with open(path, "r", encoding=encoding) as f:
                    content = f.read()
                self.current_encoding = encoding
                return content
            except UnicodeDecodeError:
                continue
            except OSError as e:
                raise ConfigError(f"读取配置文件失败。({e})")
        raise ConfigError("读取配置文件失败。未知编码，请保存为 UTF-8 或 GB18030。")

    def parse_ini_file(self, path):
        if not os.path.exists(path):
            raise ConfigError(f"配置文件不存在: {path}")

        content = self.read_text(path)

        has_section = False
        for line in content.splitlines():
            line = line.strip()
            if line.startswith("[") and line.endswith("]"):
                has_section = True
                break
            if line and not line.startswith("#") and not line.startswith(";"):
                break

        if not has_section:
            content = "[DEFAULT]\n" + content

        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            parser.read_string(content)
        except configparser.Error as e:
            raise ConfigError(f"配置文件格式错误: {e}")

        flat_dict = {}
        for key, val in parser["DEFAULT"].items():
            flat_dict[key] = self.clean_value(val)
        for section in parser.sections():
            for key, val in parser.items(section):
                flat_dict[key] = self.clean_value(val)

        unknown = sorted(set(flat_dict) - set(self.DEFAULT_CONFIG_VALUES))
        if unknown:
            logging.warning(f"配置文件中有未识别的键，已忽略: {', '.join(unknown)}")
            for key in unknown:
                flat_dict.pop(key)
        return parser, flat_dict

    @staticmethod
    def clean_value(val):
        # 多行值（如 sets）逐行去掉行内注释
        lines = [line.split(";")[0].split("#")[0].strip() for line in str(val).splitlines()]
        return "\n".join(line for line in lines if line)

    def ensure_default_config_values(self, flat_dict):
        for key, default_value in self.DEFAULT_CONFIG_VALUES.items():
            if key not in flat_dict:
                flat_dict[key] = default_value
        return flat_dict

    def get_config_display_label(self, key):
        description = self.CONFIG_LABELS.get(key)
        if not description:
            return f"{key}:"
        return f"{key}（{description}）:"

    def load(self, path=None, cli_values=None, environ=None):
        """
        合并配置，优先级：命令行 > 环境变量（仅种子）> 配置文件 > 默认值。
        path 为 None 时若当前目录有 QPSI.ini 则读取它。
        """
        environ = os.environ if environ is None else environ
        flat_dict = {}
        if path is None and os.path.exists(DEFAULT_CONFIG_FILE):
            path = DEFAULT_CONFIG_FILE
        if path is not None:
            _, flat_dict = self.parse_ini_file(path)
            logging.info(f"已读取配置文件 {path}（编码 {self.current_encoding}）")

        seed_env = str(environ.get(SEED_ENV_VAR, "") or "").strip()
        if seed_env:
            flat_dict["seed"] = seed_env

        for key, value in (cli_values or {}).items():
            if value is not None:
                flat_dict[key] = str(value)

        return self.ensure_default_config_values(flat_dict)
