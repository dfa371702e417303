from __future__ import annotations

import numpy as np
import pytest

from harmonic_widths import elliptic2d, spectral1d


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240611))


@pytest.fixture(scope="session")
def spectrum_p1():
    return spectral1d.solve_spectrum(1, 2049, 12)


@pytest.fixture(scope="session")
def spectrum_p2():
    return spectral1d.solve_spectrum(2, 2049, 12)


@pytest.fixture(scope="session")
def complete_2d():
    """Complete spectra of the polyharmonic operators on m = 25."""
    out = {}
    for p in (1, 2):
        op = elliptic2d.laplacian_power(p, elliptic2d.RectGrid(25))
        out[p] = elliptic2d.complete_spectrum(op)
    return out
