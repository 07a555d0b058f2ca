from .app import ServiceState, create_app, run_upstream_sync
from .auth import build_auth_headers
from .config import ServiceConfig
from .identity import KeyIdentity

__all__ = [
    "KeyIdentity",
    "ServiceConfig",
    "ServiceState",
    "build_auth_headers",
    "create_app",
    "run_upstream_sync",
]
