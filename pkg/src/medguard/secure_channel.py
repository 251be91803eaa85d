"""Simulated secure channel: keypair auth, sealed sessions, authorization.

This is a desk-scale stand-in for a remote-shell-style transport, not
production cryptography.  The handshake is a registered-key lookup plus a
nonce exchange; the session key is a digest over the public keys and
nonces; sealing XORs the payload with a digest-derived keystream.  The
swap-in point for a real transport is exactly this module's surface:
``handshake`` producing a ``SessionContext`` pair, and ``seal``/``unseal``
moving bytes under it.

Authenticity of record content is carried by the channel plus the
appended record digest; there is deliberately no keyed-hash MAC layer.
Replay defense is per-direction monotone counters, plus a server-side
nonce cache for handshake transcripts.
"""

from __future__ import annotations

import secrets
import struct
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Iterable, Mapping

from .sha256_core import digest as sha256_digest

__all__ = [
    "AuthFailure",
    "ReplayOrReorder",
    "SessionClosed",
    "ROLES",
    "PRIVILEGES",
    "ROLE_ALLOWED_PRIVILEGES",
    "Principal",
    "make_principal",
    "KeyDirectory",
    "AccessPolicy",
    "SessionContext",
    "HandshakeHello",
    "HandshakeReply",
    "generate_keypair",
    "initiate_handshake",
    "respond_handshake",
    "complete_handshake",
    "handshake",
    "seal",
    "unseal",
    "authorize",
]


class AuthFailure(Exception):
    """Unknown or mismatched key, or a replayed handshake transcript."""


class ReplayOrReorder(Exception):
    """Wire message carries a counter at or below the last accepted one."""


class SessionClosed(Exception):
    """Operation attempted on a closed session."""


ROLES = ("patient", "physician", "caregiver", "researcher", "microcontroller", "cloud")

PRIVILEGES = ("read_records", "write_records", "issue_command", "change_schedule")

# Deny-by-default: a role may hold at most these privileges.  Only
# physicians and caregivers may ever hold issue_command; researchers are
# read-only by agreement.
ROLE_ALLOWED_PRIVILEGES: Mapping[str, frozenset[str]] = {
    "patient": frozenset({"read_records", "change_schedule"}),
    "physician": frozenset(PRIVILEGES),
    "caregiver": frozenset({"read_records", "issue_command"}),
    "researcher": frozenset({"read_records"}),
    "microcontroller": frozenset({"read_records", "write_records", "change_schedule"}),
    "cloud": frozenset({"read_records", "write_records"}),
}

KEY_SIZE = 32
NONCE_SIZE = 16
SESSION_ID_SIZE = 16
COUNTER_SIZE = 8


def generate_keypair(seed: bytes) -> tuple[bytes, bytes]:
    """Deterministic toy keypair: public derivable from private, not back.

    Within this stand-in's contract the private key is a one-way digest
    of the seed and the public key a one-way digest of the private key.
    """
    private = sha256_digest(b"medguard.keypair.private\x00" + seed)
    public = sha256_digest(b"medguard.keypair.public\x00" + private)
    return public, private


@dataclass(frozen=True)
class Principal:
    """An authenticated actor with explicit privileges."""

    id: str
    role: str
    public_key: bytes
    private_key: bytes
    privileges: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        object.__setattr__(self, "privileges", frozenset(self.privileges))
        unknown = self.privileges - set(PRIVILEGES)
        if unknown:
            raise ValueError(f"unknown privileges {sorted(unknown)}")
        excess = self.privileges - ROLE_ALLOWED_PRIVILEGES[self.role]
        if excess:
            raise ValueError(
                f"role {self.role!r} may not hold privileges {sorted(excess)}"
            )


def make_principal(
    principal_id: str,
    role: str,
    seed: bytes,
    privileges: Iterable[str] | None = None,
) -> Principal:
    """Principal with a seed-derived keypair and the role's default privileges."""
    public, private = generate_keypair(seed)
    granted = ROLE_ALLOWED_PRIVILEGES[role] if privileges is None else frozenset(privileges)
    return Principal(id=principal_id, role=role, public_key=public, private_key=private, privileges=granted)


class KeyDirectory:
    """Registry of principal ids, roles, public keys, and privileges.

    Read-mostly; registration is the only mutation.  Persists to a plain
    text file of ``id role pubkey-hex priv,priv`` lines.
    """

    def __init__(self) -> None:
        self._entries: dict[str, tuple[str, bytes, frozenset[str]]] = {}

    def register(self, principal: Principal) -> None:
        if principal.id in self._entries:
            raise ValueError(f"principal {principal.id!r} already registered")
        self._entries[principal.id] = (principal.role, principal.public_key, principal.privileges)

    def public_key_of(self, principal_id: str) -> bytes:
        try:
            return self._entries[principal_id][1]
        except KeyError:
            raise AuthFailure(f"principal {principal_id!r} is not registered") from None

    def role_of(self, principal_id: str) -> str:
        try:
            return self._entries[principal_id][0]
        except KeyError:
            raise AuthFailure(f"principal {principal_id!r} is not registered") from None

    def __contains__(self, principal_id: str) -> bool:
        return principal_id in self._entries

    def ids(self) -> list[str]:
        return sorted(self._entries)

    def save(self, path: str | Path) -> None:
        lines = []
        for pid in sorted(self._entries):
            role, public, privs = self._entries[pid]
            lines.append(f"{pid} {role} {public.hex()} {','.join(sorted(privs)) or '-'}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "KeyDirectory":
        directory = cls()
        for raw in Path(path).read_text().splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            pid, role, pub_hex, privs = line.split()
            granted = frozenset() if privs == "-" else frozenset(privs.split(","))
            directory._entries[pid] = (role, bytes.fromhex(pub_hex), granted)
        return directory


@dataclass(frozen=True)
class AccessPolicy:
    """Which principals are linked to which patients, plus research consent."""

    links: Mapping[str, frozenset[str]] = field(default_factory=dict)
    research_consent: frozenset[tuple[str, str]] = frozenset()

    def linked(self, principal_id: str, patient_id: str) -> bool:
        return patient_id in self.links.get(principal_id, frozenset())

    def consented(self, principal_id: str, patient_id: str) -> bool:
        return (principal_id, patient_id) in self.research_consent


def authorize(principal: Principal, action: str, target_patient: str, policy: AccessPolicy) -> bool:
    """Deny-by-default decision: privilege held and principal linked to target.

    A researcher with a recorded consent agreement may read that
    patient's records without a care link; nothing else bypasses links.
    """
    if action not in PRIVILEGES:
        return False
    if action not in principal.privileges:
        return False
    if policy.linked(principal.id, target_patient):
        return True
    if (
        principal.role == "researcher"
        and action == "read_records"
        and policy.consented(principal.id, target_patient)
    ):
        return True
    return False


# --- handshake ---------------------------------------------------------------

@dataclass(frozen=True)
class HandshakeHello:
    sender_id: str
    public_key: bytes
    nonce: bytes


@dataclass(frozen=True)
class HandshakeReply:
    sender_id: str
    public_key: bytes
    nonce: bytes


@dataclass
class SessionContext:
    """One endpoint's view of an authenticated, sealed session.

    Single-owner: counters mutate per message, so never share one
    instance between threads.
    """

    session_id: bytes
    local_id: str
    peer_id: str
    session_key: bytes
    send_counter: int = 0
    recv_counter: int = 0
    closed: bool = False

    def close(self) -> None:
        self.closed = True


def _nonce(rng: Random | None) -> bytes:
    if rng is None:
        return secrets.token_bytes(NONCE_SIZE)
    return rng.randbytes(NONCE_SIZE)


def _session_material(hello: HandshakeHello, reply: HandshakeReply) -> tuple[bytes, bytes]:
    transcript = (
        b"medguard.session\x00"
        + hello.public_key
        + reply.public_key
        + hello.nonce
        + reply.nonce
    )
    key = sha256_digest(transcript)
    session_id = sha256_digest(b"medguard.session.id\x00" + transcript)[:SESSION_ID_SIZE]
    return session_id, key


def initiate_handshake(client: Principal, rng: Random | None = None) -> HandshakeHello:
    return HandshakeHello(sender_id=client.id, public_key=client.public_key, nonce=_nonce(rng))


def respond_handshake(
    server: Principal,
    directory: KeyDirectory,
    hello: HandshakeHello,
    rng: Random | None = None,
    seen_nonces: set[bytes] | None = None,
) -> tuple[HandshakeReply, SessionContext]:
    """Authenticate the hello against the directory and derive the session.

    ``seen_nonces`` is the server's replay cache; passing the same set
    across calls makes a replayed transcript abort.
    """
    registered = directory.public_key_of(hello.sender_id)
    if registered != hello.public_key:
        raise AuthFailure(f"public key for {hello.sender_id!r} does not match the directory")
    if seen_nonces is not None:
        if hello.nonce in seen_nonces:
            raise AuthFailure("stale handshake nonce: transcript replay")
        seen_nonces.add(hello.nonce)
    reply = HandshakeReply(sender_id=server.id, public_key=server.public_key, nonce=_nonce(rng))
    session_id, key = _session_material(hello, reply)
    ctx = SessionContext(
        session_id=session_id, local_id=server.id, peer_id=hello.sender_id, session_key=key
    )
    return reply, ctx


def complete_handshake(
    client: Principal, directory: KeyDirectory, hello: HandshakeHello, reply: HandshakeReply
) -> SessionContext:
    registered = directory.public_key_of(reply.sender_id)
    if registered != reply.public_key:
        raise AuthFailure(f"public key for {reply.sender_id!r} does not match the directory")
    session_id, key = _session_material(hello, reply)
    return SessionContext(
        session_id=session_id, local_id=client.id, peer_id=reply.sender_id, session_key=key
    )


def handshake(
    client: Principal,
    server: Principal,
    directory: KeyDirectory,
    rng: Random | None = None,
    seen_nonces: set[bytes] | None = None,
) -> tuple[SessionContext, SessionContext]:
    """Run the full exchange in-process; returns (client_ctx, server_ctx)."""
    hello = initiate_handshake(client, rng)
    reply, server_ctx = respond_handshake(server, directory, hello, rng, seen_nonces)
    client_ctx = complete_handshake(client, directory, hello, reply)
    return client_ctx, server_ctx


# --- sealed wire messages -----------------------------------------------------

def _keystream(key: bytes, counter: int, length: int) -> bytes:
    blocks = bytearray()
    counter_bytes = struct.pack(">Q", counter)
    for i in range((length + 31) // 32):
        blocks += sha256_digest(key + counter_bytes + struct.pack(">Q", i))
    return bytes(blocks[:length])


def _xor(data: bytes, stream: bytes) -> bytes:
    if not data:
        return b""
    # big-int xor; fixed-width to_bytes keeps leading zeros
    return (int.from_bytes(data, "big") ^ int.from_bytes(stream, "big")).to_bytes(len(data), "big")


def seal(ctx: SessionContext, plaintext: bytes) -> bytes:
    """Wire message: session_id, 8-byte big-endian counter, ciphertext."""
    if ctx.closed:
        raise SessionClosed(f"session with {ctx.peer_id!r} is closed")
    ctx.send_counter += 1
    counter = ctx.send_counter
    stream = _keystream(ctx.session_key, counter, len(plaintext))
    return ctx.session_id + struct.pack(">Q", counter) + _xor(plaintext, stream)


def unseal(ctx: SessionContext, wire: bytes) -> bytes:
    """Recover plaintext; counters at or below the last accepted are rejected.

    The session id is not authenticated here on purpose: a message
    sealed under a different session decrypts to noise, and the signed
    payload inside then fails verification, which is the layer that
    owns integrity.
    """
    if ctx.closed:
        raise SessionClosed(f"session with {ctx.peer_id!r} is closed")
    header = SESSION_ID_SIZE + COUNTER_SIZE
    if len(wire) < header:
        raise ReplayOrReorder(f"wire message of {len(wire)} bytes is shorter than its header")
    (counter,) = struct.unpack_from(">Q", wire, SESSION_ID_SIZE)
    if counter <= ctx.recv_counter:
        raise ReplayOrReorder(
            f"counter {counter} not above last accepted {ctx.recv_counter}"
        )
    ciphertext = wire[header:]
    stream = _keystream(ctx.session_key, counter, len(ciphertext))
    ctx.recv_counter = counter
    return _xor(ciphertext, stream)
