"""Executable split pipeline: wire framing, filter gate, client and server."""

from .filtergate import FilterModel, GateMetrics, filter_decide, gate_metrics
from .server import PipelineServer, serve
from .session import (
    ImageRecord,
    SessionLog,
    TokenBucket,
    make_stream,
    run_session,
    tensor_digest,
)
from .wire import (
    MAGIC,
    MAX_NDIM,
    VERSION,
    MsgType,
    WireMessage,
    decode_message,
    detection_result_message,
    empty_result_message,
    encode_message,
    load_message,
    message_to_quantized,
    message_to_tensor,
    quantized_to_message,
    save_message,
    tensor_to_message,
)

__all__ = [
    "FilterModel",
    "GateMetrics",
    "filter_decide",
    "gate_metrics",
    "PipelineServer",
    "serve",
    "ImageRecord",
    "SessionLog",
    "TokenBucket",
    "make_stream",
    "run_session",
    "tensor_digest",
    "MAGIC",
    "MAX_NDIM",
    "VERSION",
    "MsgType",
    "WireMessage",
    "decode_message",
    "detection_result_message",
    "empty_result_message",
    "encode_message",
    "load_message",
    "message_to_quantized",
    "message_to_tensor",
    "quantized_to_message",
    "save_message",
    "tensor_to_message",
]
