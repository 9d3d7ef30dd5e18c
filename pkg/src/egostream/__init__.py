"""Real-time egocentric-assistant backend: stream ingestion, an always-on
timestamped memory of scene descriptions, wake-word voice sessions, temporal
grounding and summarization, how-to retrieval, and demonstration-clip
generation, with every model behind a swappable adapter."""

from .config import Config, load_config
from .errors import EgostreamError
from .gateway import IntentKind, ModelGateway, build_gateway, route_intent
from .ingest import StreamSource, SynthSpec
from .memory import MemoryEntry, MemoryLog
from .orchestrator import AssistantResponse, StreamManager, StreamWorker
from .retrieval import RetrievalIndex, build_index, search
from .session import Session, SessionState, step
from .timeline import Frame, StreamClock, TranscriptSegment, format_timestamp

__version__ = "0.1.0"

__all__ = [
    "AssistantResponse",
    "Config",
    "EgostreamError",
    "Frame",
    "IntentKind",
    "MemoryEntry",
    "MemoryLog",
    "ModelGateway",
    "RetrievalIndex",
    "Session",
    "SessionState",
    "StreamClock",
    "StreamManager",
    "StreamSource",
    "StreamWorker",
    "SynthSpec",
    "TranscriptSegment",
    "__version__",
    "build_gateway",
    "build_index",
    "format_timestamp",
    "load_config",
    "route_intent",
    "search",
    "step",
]
