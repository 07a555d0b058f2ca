from .engine import SyncOutcome, merge, record_and_propagate, resolve_read_source
from .replica import (
    AddResult,
    ConnectivityState,
    ReplicaKind,
    ReplicaStore,
    SyncFault,
)
from .wire import SyncBatch, decode_batch, encode_batch

__all__ = [
    "AddResult",
    "ConnectivityState",
    "ReplicaKind",
    "ReplicaStore",
    "SyncBatch",
    "SyncFault",
    "SyncOutcome",
    "decode_batch",
    "encode_batch",
    "merge",
    "record_and_propagate",
    "resolve_read_source",
]
