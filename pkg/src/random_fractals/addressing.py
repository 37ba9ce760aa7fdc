"""Tree addresses and the per-address random streams derived from them.

An address is a tuple of positive integers: the path from the root of the
construction tree, with ``()`` the root itself. Random streams are keyed by
a SHA-256 digest of the seed and the address digits, so the draw made at a
node does not depend on the order in which the tree is traversed.
"""

from collections.abc import Iterable
from hashlib import sha256
from typing import Any

import numpy as np

type Address = tuple[int, ...]

ROOT: Address = ()

# Labels that separate independent stream families under one seed.
NODE_STREAM = "node"
REALIZATION_STREAM = "realization"
REPLICA_STREAM = "replica"


def _normalize_value(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, tuple):
        return ".".join(str(digit) for digit in x)
    return str(x)


def _generate_hash(*s: Any) -> bytes:
    to_hash = [_normalize_value(x) for x in s]
    return sha256("||".join(to_hash).encode("utf-8")).digest()


def concat(sigma: Address, tau: Address) -> Address:
    """Concatenation sigma * tau."""
    return sigma + tau


def prefix(sigma: Address, k: int) -> Address:
    """The first k digits of sigma.

    Raises:
        ValueError: If k is negative or longer than sigma.
    """
    if not 0 <= k <= len(sigma):
        msg = f"prefix length {k} is out of range for {sigma!r}"
        raise ValueError(msg)
    return sigma[:k]


def precedes(sigma: Address, tau: Address) -> bool:
    """Strict prefix order: True iff tau starts with sigma and is longer."""
    return len(sigma) < len(tau) and tau[: len(sigma)] == sigma


def is_antichain(addresses: Iterable[Address]) -> bool:
    """Return True if no address is a prefix of another one."""
    members = set(addresses)
    return not any(
        sigma[:k] in members
        for sigma in members
        for k in range(len(sigma))
    )


def validate_address(sigma: Address) -> Address:
    """Return sigma unchanged after checking that all digits are positive."""
    if any(digit < 1 for digit in sigma):
        msg = f"address digits must be positive integers, got {sigma!r}"
        raise ValueError(msg)
    return sigma


def format_address(sigma: Address) -> str:
    """Render an address as dotted digits, the root as an empty string."""
    return _normalize_value(sigma)


def parse_address(text: str) -> Address:
    """Inverse of `format_address`; also accepts comma separators."""
    cleaned = text.replace(",", ".").strip().strip(".")
    if not cleaned:
        return ROOT
    return validate_address(tuple(int(part) for part in cleaned.split(".")))


def stream_key(seed: int, *labels: Any) -> int:
    """128-bit Philox key for the stream identified by seed and labels."""
    return int.from_bytes(_generate_hash(seed, *labels)[:16], "big")


def node_rng(seed: int, sigma: Address) -> np.random.Generator:
    """Random stream of the node at address sigma."""
    return np.random.Generator(
        np.random.Philox(key=stream_key(seed, NODE_STREAM, sigma))
    )


def realization_rng(seed: int) -> np.random.Generator:
    """Stream for draws shared by the whole realization (such as p)."""
    return np.random.Generator(
        np.random.Philox(key=stream_key(seed, REALIZATION_STREAM))
    )


def replica_seed(seed: int, index: int, *labels: Any) -> int:
    """Seed of replica ``index`` derived from a base seed."""
    return int.from_bytes(
        _generate_hash(seed, REPLICA_STREAM, index, *labels)[:8], "big"
    )
