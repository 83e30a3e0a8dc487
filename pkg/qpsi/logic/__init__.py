from .protocol_engine import ProtocolEngine
from .run_config import RunConfig

__all__ = ["ProtocolEngine", "RunConfig"]
