import numpy as np
from hypothesis import given, strategies as st

from pointdream.rng import MASK64, SplitMix64, fisher_yates_prefix


def reference_splitmix64(seed, n):
    # straight transcription of the published C routine
    out = []
    x = seed
    for _ in range(n):
        x = (x + 0x9E3779B97F4A7C15) % 2**64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) % 2**64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) % 2**64
        out.append(z ^ (z >> 31))
    return out


def reference_shuffle_prefix(count, n, seed):
    gen = iter(reference_splitmix64(seed, n))
    a = list(range(count))
    for i in range(n):
        j = i + next(gen) % (count - i)
        a[i], a[j] = a[j], a[i]
    return a[:n]


def test_published_vectors():
    rng = SplitMix64(1234567)
    assert [rng.next_u64() for _ in range(5)] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
        4593380528125082431,
        16408922859458223821,
    ]
    assert SplitMix64(0).next_u64() == 0xE220A8397B1DCDAF


@given(st.integers(0, MASK64), st.integers(0, 50))
def test_block_draws_match_sequential(seed, n):
    a, b = SplitMix64(seed), SplitMix64(seed)
    block = a.u64_array(n).tolist()
    assert block == [b.next_u64() for _ in range(n)]
    assert block == reference_splitmix64(seed, n)
    assert a.next_u64() == b.next_u64()


def test_uniform_range_and_normal_moments():
    rng = SplitMix64(3)
    u = rng.uniform(100_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    z = SplitMix64(4).normal(100_001)
    assert len(z) == 100_001
    assert abs(z.mean()) < 0.02 and abs(z.std() - 1.0) < 0.02


def test_fisher_yates_seed_42_matches_reference():
    for count, n in [(10, 4), (100, 100), (5000, 4096), (7, 0)]:
        assert fisher_yates_prefix(count, n, 42) == reference_shuffle_prefix(count, n, 42)
