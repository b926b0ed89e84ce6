"""HTTP inference bridge for pagerag.

All model specificity lives here; the retrieval library only ever talks to
this service over the versioned JSON protocol (/embed, /embed_sparse,
/rerank, /generate, /health).
"""

from .app import PROTOCOL_VERSION, create_app
from .backends import Backend, BuiltinBackend, ModelUnavailable, TransformersBackend

__version__ = "0.1.0"

__all__ = [
    "PROTOCOL_VERSION",
    "create_app",
    "Backend",
    "BuiltinBackend",
    "ModelUnavailable",
    "TransformersBackend",
]
