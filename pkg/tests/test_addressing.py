import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from random_fractals import addressing

addresses = st.lists(st.integers(1, 6), max_size=6).map(tuple)


def test_generate_hash_deterministic() -> None:
    h1 = addressing._generate_hash(3, "node", (1, 2))
    h2 = addressing._generate_hash(3, "node", (1, 2))
    assert h1 == h2


def test_generate_hash_separator_prevents_collision() -> None:
    h1 = addressing._generate_hash("ab", "c")
    h2 = addressing._generate_hash("a", "bc")
    assert h1 != h2


def test_normalize_value_address_uses_dots() -> None:
    assert addressing._normalize_value((1, 12, 3)) == "1.12.3"
    assert addressing._normalize_value(None) == ""


@given(addresses, addresses)
def test_concat_then_prefix_recovers_address(
    sigma: tuple[int, ...], tau: tuple[int, ...]
) -> None:
    joined = addressing.concat(sigma, tau)
    assert addressing.prefix(joined, len(sigma)) == sigma
    assert addressing.precedes(sigma, joined) == bool(tau)


def test_prefix_out_of_range_raises() -> None:
    with pytest.raises(ValueError, match="out of range"):
        addressing.prefix((1, 2), 3)


def test_precedes_is_strict() -> None:
    assert addressing.precedes((), (1,))
    assert addressing.precedes((1,), (1, 2))
    assert not addressing.precedes((1, 2), (1, 2))
    assert not addressing.precedes((2,), (1, 2))


def test_is_antichain() -> None:
    assert addressing.is_antichain([(1,), (2, 1), (2, 2)])
    assert addressing.is_antichain([])
    assert not addressing.is_antichain([(2,), (2, 1)])
    assert not addressing.is_antichain([(), (1,)])


def test_validate_address_rejects_zero_digit() -> None:
    with pytest.raises(ValueError, match="positive"):
        addressing.validate_address((1, 0))


@pytest.mark.parametrize(
    ("text", "expected"),
    [("", ()), ("1.2.3", (1, 2, 3)), ("4,5", (4, 5)), (" 7 ", (7,))],
)
def test_parse_address(text: str, expected: tuple[int, ...]) -> None:
    assert addressing.parse_address(text) == expected


@given(addresses)
def test_format_then_parse_is_identity(sigma: tuple[int, ...]) -> None:
    assert addressing.parse_address(addressing.format_address(sigma)) == sigma


def test_node_rng_depends_only_on_seed_and_address() -> None:
    first = addressing.node_rng(5, (1, 2)).random(4)
    again = addressing.node_rng(5, (1, 2)).random(4)
    sibling = addressing.node_rng(5, (1, 3)).random(4)
    other_seed = addressing.node_rng(6, (1, 2)).random(4)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, sibling)
    assert not np.array_equal(first, other_seed)


def test_realization_rng_is_separate_from_root_stream() -> None:
    root = addressing.node_rng(5, ()).random(3)
    shared = addressing.realization_rng(5).random(3)
    assert not np.array_equal(root, shared)


def test_replica_seeds_are_distinct_and_stable() -> None:
    seeds = [addressing.replica_seed(9, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert seeds == [addressing.replica_seed(9, i) for i in range(100)]
    assert addressing.replica_seed(9, 0, "fractal") != seeds[0]
