"""Everything derived from the shared secret key.

Two independent cursors stride over the same key bits: one reads
``transfer_length`` bits per authentication round and interprets them
most-significant-bit-first as R, the number of data qubits sent before the
next check; the other reads two bits per round to pick the authentication
qubit's initial value and encoding basis. Both cursors wrap around the key
indefinitely, so one key supports any session length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qsim import Basis

#: expected state label by (encoding_bit, base_bit)
AUTH_STATE_TABLE = {
    (0, 0): "0",
    (1, 0): "1",
    (0, 1): "+",
    (1, 1): "-",
}

MAX_TRANSFER_LENGTH = 16


@dataclass(frozen=True)
class KeyMaterial:
    """Immutable shared secret bit string."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) < 2:
            raise ValueError("key needs at least 2 bits")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("key bits must be 0 or 1")

    @property
    def length(self) -> int:
        return len(self.bits)

    def bit(self, offset: int) -> int:
        return self.bits[offset % len(self.bits)]

    @classmethod
    def from_bits(cls, bits) -> "KeyMaterial":
        return cls(tuple(int(b) for b in bits))

    @classmethod
    def random(cls, length: int, rng: np.random.Generator) -> "KeyMaterial":
        if length < 2:
            raise ValueError("key length must be >= 2")
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=length)))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def parse_key(text: str, bit_length: int | None = None) -> KeyMaterial:
    """Parse a key from an ASCII '0'/'1' string, or from '0x...' hex with an
    explicit bit length."""
    text = text.strip()
    if text.lower().startswith("0x"):
        if bit_length is None:
            raise ValueError("hex keys need an explicit bit length")
        value = int(text, 16)
        if value >= (1 << bit_length):
            raise ValueError(f"hex value does not fit in {bit_length} bits")
        return KeyMaterial(tuple((value >> (bit_length - 1 - i)) & 1 for i in range(bit_length)))
    if not text or set(text) - {"0", "1"}:
        raise ValueError("key must be a 0/1 string or 0x-prefixed hex")
    return KeyMaterial(tuple(int(c) for c in text))


@dataclass(frozen=True)
class ScheduleConfig:
    """Session-constant schedule parameters.

    The encoding index and base index select which bit of each key pair sets
    the auth qubit's initial value and which sets its basis; they are always
    opposite, so only the encoding index is stored.
    """

    transfer_length: int
    encoding_index: int = 0

    def __post_init__(self):
        if not 1 <= self.transfer_length <= MAX_TRANSFER_LENGTH:
            raise ValueError(
                f"transfer length must be in [1, {MAX_TRANSFER_LENGTH}]"
            )
        if self.encoding_index not in (0, 1):
            raise ValueError("encoding index must be 0 or 1")

    @property
    def base_index(self) -> int:
        return 1 - self.encoding_index


@dataclass
class KeyCursors:
    """Mutable per-session read positions into the key."""

    r_cursor: int = 0
    pair_cursor: int = 0
    round_index: int = 0


@dataclass(frozen=True)
class AuthPlan:
    """One round's authentication qubit recipe: value bit plus basis bit."""

    encoding_bit: int
    base_bit: int

    @property
    def basis(self) -> Basis:
        return Basis.X if self.base_bit else Basis.Z

    @property
    def expected_state(self) -> str:
        return AUTH_STATE_TABLE[(self.encoding_bit, self.base_bit)]


def next_r(key: KeyMaterial, cfg: ScheduleConfig, cursors: KeyCursors) -> int:
    """Read the next transfer window: T key bits, MSB first, wrapping."""
    t = cfg.transfer_length
    value = 0
    for i in range(t):
        value = (value << 1) | key.bit(cursors.r_cursor + i)
    cursors.r_cursor = (cursors.r_cursor + t) % key.length
    return value


def next_auth_pair(
    key: KeyMaterial, cfg: ScheduleConfig, cursors: KeyCursors
) -> AuthPlan:
    """Read the next two key bits and split them into an AuthPlan."""
    pair = (key.bit(cursors.pair_cursor), key.bit(cursors.pair_cursor + 1))
    cursors.pair_cursor = (cursors.pair_cursor + 2) % key.length
    cursors.round_index += 1
    return AuthPlan(
        encoding_bit=pair[cfg.encoding_index],
        base_bit=pair[cfg.base_index],
    )


def capacity(key_length: int, transfer_length: int) -> int:
    """Average number of data qubits one full pass of the key supports.

    A pass yields floor(L/T) windows, each averaging (2^T - 1)/2 data qubits
    over uniform keys; the result is floored to a whole qubit count.
    """
    if transfer_length < 1:
        raise ValueError("transfer length must be >= 1")
    if key_length < transfer_length:
        raise ValueError("key length must be >= transfer length")
    windows = key_length // transfer_length
    return (2**transfer_length - 1) * windows // 2
