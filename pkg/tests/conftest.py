import numpy as np
import pytest

from symsep.symmetry import ChargeFamily, ChargeOperator, resolve_levels

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def random_density(d, rng, rank=None):
    """Hilbert-Schmidt (or rank-limited) random density matrix."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def ket(*bits, d=2):
    v = np.zeros(d ** len(bits), dtype=complex)
    idx = 0
    for b in bits:
        idx = idx * d + b
    v[idx] = 1
    return v


def family(kind, dims, levels="range0"):
    lv = levels if isinstance(levels, tuple) else (levels, levels)
    nA = ChargeOperator.from_levels(resolve_levels(lv[0], dims[0]), "N_A")
    nB = ChargeOperator.from_levels(resolve_levels(lv[1], dims[1]), "N_B")
    return ChargeFamily.from_local(kind, nA, nB)


@pytest.fixture
def rng():
    return np.random.default_rng(20241015)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
