"""medguard: signed health-record protocol stack with an availability model.

Subpackages by concern:

- ``sha256_core``: from-scratch SHA-256 (padding, schedule, compression).
- ``record_protocol``: canonical record bytes, sign / verify, tamper detection.
- ``secure_channel``: toy authenticated sessions, sealing, authorization.
- ``system_sim``: deterministic device-to-cloud simulation with fault injection.
- ``reliability``: 12-state continuous-time Markov availability engine.
- ``cli``: the ``medguard`` command.
"""

from .record_protocol import (
    HealthRecord,
    PrescriptionCommand,
    SignedBlob,
    TamperDetected,
    sign,
    verify,
)
from .sha256_core import Sha256, digest
from .reliability import build_generator, bundled_rate_table, solve_transient, steady_state

__version__ = "0.1.0"

__all__ = [
    "HealthRecord",
    "PrescriptionCommand",
    "SignedBlob",
    "TamperDetected",
    "sign",
    "verify",
    "Sha256",
    "digest",
    "build_generator",
    "bundled_rate_table",
    "solve_transient",
    "steady_state",
    "__version__",
]
