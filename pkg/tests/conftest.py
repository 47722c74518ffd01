import numpy as np
import pytest

from starszego.symbol import SymbolGrid, as_tx


def random_banded_symbol(rng, band, x_lo, x_hi, rho=0.35, base=1.0):
    """Random banded grid with coefficients decaying like rho^|k|."""
    ntx = as_tx(x_hi) - as_tx(x_lo) + 1
    co = rng.standard_normal((ntx, 2 * band + 1)) + 1j * rng.standard_normal(
        (ntx, 2 * band + 1))
    co *= rho ** np.abs(np.arange(-band, band + 1))[None, :]
    if base:
        co[:, band] += base
    return SymbolGrid(as_tx(x_lo), co, rho)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
