import re
from pathlib import Path


class OutputNamingMixin:
    def sanitize_filename_component(self, value):
        text = str(value or "").strip()
        text = re.sub(r"[^\w\u4e00-\u9fff.-]+", "_", text)
        text = re.sub(r"_+", "_", text).strip("._ ")
        return text or "未命名"

    def build_output_stem(self, suffix=""):
        config = self.config
        parts = [
            self.command,
            f"q{config.q}",
            f"m{len(config.sets)}" if config.sets else "",
            f"seed{config.seed}",
            config.adversary.kind.value if config.adversary.kind.value != "none" else "",
            suffix,
        ]
        return "_".join(self.sanitize_filename_component(p) for p in parts if p)

    def resolve_output_path(self, path, extension, suffix=""):
        """path 是已存在的目录时，在其中按运行参数生成文件名。"""
        if path is None:
            return None
        path = Path(path)
        if path.is_dir():
            return path / f"{self.build_output_stem(suffix)}{extension}"
        return path
