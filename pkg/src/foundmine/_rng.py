"""Seed derivation shared by every stochastic stage.

``mix64`` is the documented mixing function: stream seeds for restarts,
grid cells, and trees are ``mix64(base_seed, *indices)``, so results are
independent of scheduling and thread count.
"""

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(seed: int, *parts: int) -> int:
    """Hash ``seed`` with any number of integer stream identifiers.

    splitmix64-style avalanche applied per part; returns a nonzero
    64-bit value suitable for seeding either numpy generators or the
    in-kernel xorshift state.
    """
    h = seed & _MASK64
    for p in (0,) + parts:
        h = (h ^ (p & _MASK64)) & _MASK64
        h = (h + _GOLDEN) & _MASK64
        h ^= h >> 30
        h = (h * 0xBF58476D1CE4E5B9) & _MASK64
        h ^= h >> 27
        h = (h * 0x94D049BB133111EB) & _MASK64
        h ^= h >> 31
    return h or _GOLDEN
