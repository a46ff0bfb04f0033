import numpy as np
import pytest

from servokit.prng import XorShift64Star, splitmix64


def test_splitmix64_reference_value():
    # First output of SplitMix64 from state 0, as published with the reference C code.
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def numpy_stream(seed, n):
    """xorshift64* with numpy uint64 wrap-around instead of Python int masking."""
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        x = z ^ (z >> np.uint64(31))
        out = []
        for _ in range(n):
            x ^= x >> np.uint64(12)
            x ^= x << np.uint64(25)
            x ^= x >> np.uint64(27)
            out.append(int(x * np.uint64(0x2545F4914F6CDD1D)))
    return out


@pytest.mark.parametrize("seed", [0, 1, 42, 2**63 + 5, 2**64 - 1])
def test_stream_matches_numpy_oracle(seed):
    g = XorShift64Star(seed)
    assert [g.next_u64() for _ in range(50)] == numpy_stream(seed, 50)


def test_frozen_values():
    g = XorShift64Star(42)
    assert [g.next_u64() for _ in range(3)] == [3580622183945639842, 10378725325292465923, 8967075514996744559]
    items = list(range(10))
    XorShift64Star(1).shuffle(items)
    assert items == [0, 1, 9, 4, 3, 7, 2, 6, 8, 5]


def test_below_range_and_rough_uniformity():
    g = XorShift64Star(7)
    draws = [g.below(6) for _ in range(6000)]
    assert set(draws) == set(range(6))
    counts = np.bincount(draws)
    assert counts.min() > 850 and counts.max() < 1150
    with pytest.raises(ValueError):
        g.below(0)


def test_shuffle_is_permutation():
    items = list(range(100))
    XorShift64Star(3).shuffle(items)
    assert sorted(items) == list(range(100)) and items != list(range(100))


def test_spawn_independent_and_deterministic():
    a, b = XorShift64Star(5).spawn(1), XorShift64Star(5).spawn(1)
    c = XorShift64Star(5).spawn(2)
    sa = [a.next_u64() for _ in range(5)]
    assert sa == [b.next_u64() for _ in range(5)]
    assert sa != [c.next_u64() for _ in range(5)]
