"""Bit-exact SHA-256 digest engine (FIPS 180-4), built from scratch.

The hot path is pure Python, so the compression function leans on one
arithmetic identity: multiplying a 32-bit word by 0x100000001 places two
copies of the word side by side in a 64-bit integer, after which any
right-rotation is a single shift (plus the final 32-bit mask applied once
per sigma).  Upper garbage bits never reach the low 32 bits under
addition or xor, so intermediate values stay unmasked until stored.

Three layers are exposed:

- ``pad_message`` / ``compress`` / ``digest``: the block-level pipeline
  (pad, schedule, compress, chain).
- ``Sha256``: a streaming hasher (update / digest) so large inputs need
  not be buffered.
- ``chain_to_bytes``: big-endian serialization of a chaining value; the
  final chain serialized this way *is* the digest.
"""

from __future__ import annotations

import struct
from typing import Iterable, Iterator, Sequence

__all__ = [
    "OversizeMessage",
    "IHV0",
    "MessageBlock",
    "ChainValue",
    "pad_message",
    "iter_padded_blocks",
    "compress",
    "chain_to_bytes",
    "digest",
    "hexdigest",
    "Sha256",
]


class OversizeMessage(ValueError):
    """Input longer than the 2**64 - 1 bit limit of the padding rule."""


# A message block is 16 big-endian 32-bit words (one 512-bit block); a
# chaining value is 8 such words (256 bits).
MessageBlock = tuple
ChainValue = tuple

_MASK32 = 0xFFFFFFFF
_DUP = 0x100000001  # x * _DUP == two copies of x in 64 bits; shift == rotate
_MAX_BITS = 1 << 64

# Initial hash value: fractional parts of the square roots of the first
# eight primes (FIPS 180-4 section 5.3.3).
IHV0: ChainValue = (
    0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A,
    0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19,
)

# Round constants: fractional parts of the cube roots of the first 64
# primes (FIPS 180-4 section 4.2.2).
_K = (
    0x428A2F98, 0x71374491, 0xB5C0FBCF, 0xE9B5DBA5, 0x3956C25B, 0x59F111F1, 0x923F82A4, 0xAB1C5ED5,
    0xD807AA98, 0x12835B01, 0x243185BE, 0x550C7DC3, 0x72BE5D74, 0x80DEB1FE, 0x9BDC06A7, 0xC19BF174,
    0xE49B69C1, 0xEFBE4786, 0x0FC19DC6, 0x240CA1CC, 0x2DE92C6F, 0x4A7484AA, 0x5CB0A9DC, 0x76F988DA,
    0x983E5152, 0xA831C66D, 0xB00327C8, 0xBF597FC7, 0xC6E00BF3, 0xD5A79147, 0x06CA6351, 0x14292967,
    0x27B70A85, 0x2E1B2138, 0x4D2C6DFC, 0x53380D13, 0x650A7354, 0x766A0ABB, 0x81C2C92E, 0x92722C85,
    0xA2BFE8A1, 0xA81A664B, 0xC24B8B70, 0xC76C51A3, 0xD192E819, 0xD6990624, 0xF40E3585, 0x106AA070,
    0x19A4C116, 0x1E376C08, 0x2748774C, 0x34B0BCB5, 0x391C0CB3, 0x4ED8AA4A, 0x5B9CCA4F, 0x682E6FF3,
    0x748F82EE, 0x78A5636F, 0x84C87814, 0x8CC70208, 0x90BEFFFA, 0xA4506CEB, 0xBEF9A3F7, 0xC67178F2,
)


def _padding_suffix(total_length: int) -> bytes:
    """0x80, minimal zero fill, then the 64-bit big-endian bit length."""
    if total_length * 8 >= _MAX_BITS:
        raise OversizeMessage(f"message of {total_length} bytes exceeds the 2**64-bit limit")
    return b"\x80" + b"\x00" * ((55 - total_length) % 64) + struct.pack(">Q", total_length * 8)


def iter_padded_blocks(message: bytes) -> Iterator[MessageBlock]:
    """Yield the padded 512-bit blocks of ``message`` as 16-word tuples."""
    padded = message + _padding_suffix(len(message))
    for offset in range(0, len(padded), 64):
        yield struct.unpack(">16I", padded[offset : offset + 64])


def pad_message(message: bytes) -> list[MessageBlock]:
    """Pad ``message`` and return all blocks; count = ceil((bits + 65) / 512)."""
    return list(iter_padded_blocks(message))


def _schedule(words: Sequence[int]) -> tuple[int, ...]:
    """Expand one block to the 64 per-round values, pre-added to K."""
    w = list(words)
    push = w.append
    for i in range(16, 64):
        x = w[i - 15] * _DUP
        s0 = (x >> 7) ^ (x >> 18) ^ (x >> 35)  # >>35 picks the plain shr-3
        x = w[i - 2] * _DUP
        s1 = (x >> 17) ^ (x >> 19) ^ (x >> 42)  # >>42 picks the plain shr-10
        push((w[i - 16] + s0 + w[i - 7] + s1) & _MASK32)
    return tuple((k + wi) & _MASK32 for k, wi in zip(_K, w))


def compress(chain: ChainValue, block: MessageBlock) -> ChainValue:
    """One application of the compression function F to (chain, block)."""
    a, b, c, d, e, f, g, h = chain
    for kw in _schedule(block):
        x = e * _DUP
        t1 = h + (((x >> 6) ^ (x >> 11) ^ (x >> 25)) & _MASK32) + (g ^ (e & (f ^ g))) + kw
        x = a * _DUP
        t2 = (((x >> 2) ^ (x >> 13) ^ (x >> 22)) & _MASK32) + ((a & (b | c)) | (b & c))
        h = g
        g = f
        f = e
        e = (d + t1) & _MASK32
        d = c
        c = b
        b = a
        a = (t1 + t2) & _MASK32
    return (
        (chain[0] + a) & _MASK32,
        (chain[1] + b) & _MASK32,
        (chain[2] + c) & _MASK32,
        (chain[3] + d) & _MASK32,
        (chain[4] + e) & _MASK32,
        (chain[5] + f) & _MASK32,
        (chain[6] + g) & _MASK32,
        (chain[7] + h) & _MASK32,
    )


def chain_to_bytes(chain: ChainValue) -> bytes:
    """Serialize a chaining value big-endian; on the final chain this is the digest."""
    return struct.pack(">8I", *chain)


def digest(message: bytes) -> bytes:
    """32-byte SHA-256 digest of ``message``."""
    chain = IHV0
    for block in iter_padded_blocks(message):
        chain = compress(chain, block)
    return chain_to_bytes(chain)


def hexdigest(message: bytes) -> str:
    return digest(message).hex()


class Sha256:
    """Streaming hasher: feed chunks with ``update``, read with ``digest``.

    State is single-owner; hand an instance between threads, never share
    one concurrently.  ``digest`` does not consume the state, matching
    the usual hasher contract.
    """

    def __init__(self, data: bytes = b"") -> None:
        self._chain: ChainValue = IHV0
        self._tail = b""
        self._length = 0
        if data:
            self.update(data)

    def update(self, data: bytes) -> "Sha256":
        if (self._length + len(data)) * 8 >= _MAX_BITS:
            raise OversizeMessage("total streamed length exceeds the 2**64-bit limit")
        self._length += len(data)
        buf = self._tail + data
        whole = len(buf) - (len(buf) % 64)
        chain = self._chain
        for offset in range(0, whole, 64):
            chain = compress(chain, struct.unpack(">16I", buf[offset : offset + 64]))
        self._chain = chain
        self._tail = buf[whole:]
        return self

    def digest(self) -> bytes:
        # len(tail) == total % 64, so the suffix computed from the total
        # length pads the tail to a whole number of blocks.
        chain = self._chain
        buf = self._tail + _padding_suffix(self._length)
        for offset in range(0, len(buf), 64):
            chain = compress(chain, struct.unpack(">16I", buf[offset : offset + 64]))
        return chain_to_bytes(chain)

    def hexdigest(self) -> str:
        return self.digest().hex()


def digest_stream(chunks: Iterable[bytes]) -> bytes:
    """Digest an iterable of byte chunks without concatenating them."""
    hasher = Sha256()
    for chunk in chunks:
        hasher.update(chunk)
    return hasher.digest()
