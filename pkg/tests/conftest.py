import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240612)


def assert_ulp_close(a, b, ulps=4):
    """Elementwise |a - b| within the given number of spacings of the larger."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    spacing = np.spacing(np.maximum(np.abs(a), np.abs(b)))
    gap = np.abs(a - b)
    ok = (a == b) | (gap <= ulps * spacing)
    assert ok.all(), f"max ulp gap {np.max(gap / spacing):.1f} exceeds {ulps}"
