import numpy as np
import pytest


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected partition agreement by direct pair counting."""
    a = np.asarray(a)
    b = np.asarray(b)
    n = len(a)
    same_a = same_b = both = 0
    for i in range(n):
        for j in range(i + 1, n):
            sa = a[i] == a[j]
            sb = b[i] == b[j]
            same_a += sa
            same_b += sb
            both += sa and sb
    total = n * (n - 1) // 2
    expected = same_a * same_b / total
    max_index = (same_a + same_b) / 2
    if max_index == expected:
        return 1.0
    return (both - expected) / (max_index - expected)


@pytest.fixture
def ari():
    return adjusted_rand_index
