"""Digest engine: oracle conformance, padding layout, streaming, properties.

hashlib is the independent FIPS 180-4 reference; our engine never calls
it, tests compare against it.
"""

from __future__ import annotations

import hashlib
import struct
from random import Random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medguard import sha256_core as sc

# Independently verified against the reference oracle before freezing.
KNOWN_VECTORS = {
    b"": "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
    b"abc": "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
}


@pytest.mark.parametrize("message,expected", sorted(KNOWN_VECTORS.items()))
def test_known_vectors(message, expected):
    assert hashlib.sha256(message).hexdigest() == expected  # oracle agrees with frozen value
    assert sc.digest(message).hex() == expected


def test_long_vector_against_oracle():
    message = b"a" * 1_000_000
    assert sc.digest(message) == hashlib.sha256(message).digest()


# --- padding ------------------------------------------------------------------

def test_empty_message_pads_to_one_block_with_zero_length():
    blocks = sc.pad_message(b"")
    assert len(blocks) == 1
    words = blocks[0]
    assert words[0] == 0x80000000
    assert words[14] == 0 and words[15] == 0  # final 64 bits: bit length 0


def test_55_byte_message_one_block_56_bytes_two():
    assert len(sc.pad_message(b"x" * 55)) == 1
    assert len(sc.pad_message(b"x" * 56)) == 2


def test_64_byte_message_second_block_is_pure_padding():
    # enumerated by hand: 512 message bits leave no room, so block 2 is
    # 0x80, zeros, then the 64-bit length 512
    blocks = sc.pad_message(b"\xab" * 64)
    assert len(blocks) == 2
    assert blocks[0] == struct.unpack(">16I", b"\xab" * 64)
    second = blocks[1]
    assert second[0] == 0x80000000
    assert all(w == 0 for w in second[1:14])
    assert (second[14] << 32) | second[15] == 512


def test_padding_block_count_and_length_field_for_all_lengths_to_1024():
    for length in range(0, 1025):
        blocks = sc.pad_message(b"q" * length)
        assert len(blocks) == (length * 8 + 65 + 511) // 512, length
        last = blocks[-1]
        assert (last[14] << 32) | last[15] == length * 8, length


# --- compression ---------------------------------------------------------------

def test_single_block_compression_serializes_to_digest():
    blocks = sc.pad_message(b"abc")
    chain = sc.compress(sc.IHV0, blocks[0])
    assert sc.chain_to_bytes(chain) == sc.digest(b"abc")


def test_distinct_blocks_give_distinct_chains():
    block_a = sc.pad_message(b"abc")[0]
    block_b = sc.pad_message(b"abd")[0]
    assert sc.compress(sc.IHV0, block_a) != sc.compress(sc.IHV0, block_b)


def test_compress_is_deterministic():
    block = sc.pad_message(b"determinism")[0]
    assert sc.compress(sc.IHV0, block) == sc.compress(sc.IHV0, block)


def test_chaining_across_blocks_matches_oracle():
    message = bytes(range(256)) * 2
    chain = sc.IHV0
    for block in sc.pad_message(message):
        chain = sc.compress(chain, block)
    assert sc.chain_to_bytes(chain) == hashlib.sha256(message).digest()


# --- properties ------------------------------------------------------------------

@given(st.binary(max_size=2000))
@settings(max_examples=80)
def test_digest_matches_oracle(message):
    assert sc.digest(message) == hashlib.sha256(message).digest()


@given(st.binary(max_size=500))
@settings(max_examples=40)
def test_digest_is_32_bytes_and_deterministic(message):
    first = sc.digest(message)
    assert len(first) == 32
    assert first == sc.digest(message)


def test_incremental_equals_one_shot_for_all_lengths_to_1024():
    data = bytes((i * 131 + 7) % 256 for i in range(1024))
    for length in range(0, 1025):
        message = data[:length]
        chain = sc.IHV0
        for block in sc.iter_padded_blocks(message):
            chain = sc.compress(chain, block)
        assert sc.chain_to_bytes(chain) == sc.digest(message), length


def test_streaming_equals_one_shot_across_chunkings():
    rng = Random(11)
    message = rng.randbytes(10_000)
    for chunk_size in (1, 7, 63, 64, 65, 1000):
        hasher = sc.Sha256()
        for offset in range(0, len(message), chunk_size):
            hasher.update(message[offset : offset + chunk_size])
        assert hasher.digest() == sc.digest(message), chunk_size


def test_streaming_digest_is_not_destructive():
    hasher = sc.Sha256(b"part one ")
    first = hasher.digest()
    assert first == hasher.digest()
    hasher.update(b"part two")
    assert hasher.digest() == sc.digest(b"part one part two")


def test_avalanche_single_bit_flips_always_change_digest():
    rng = Random(2024)
    for _ in range(1000):
        message = bytearray(rng.randbytes(rng.randint(1, 64)))
        reference = sc.digest(bytes(message))
        bit = rng.randrange(len(message) * 8)
        message[bit // 8] ^= 1 << (bit % 8)
        assert sc.digest(bytes(message)) != reference


def test_oversize_stream_rejected():
    hasher = sc.Sha256(b"seed")
    hasher._length = (1 << 61) - 2  # simulate having streamed ~2**61 bytes
    with pytest.raises(sc.OversizeMessage):
        hasher.update(b"xx")
