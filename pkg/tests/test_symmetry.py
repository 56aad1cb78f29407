import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import SX, SZ, family, ket, random_density
from symsep import qla
from symsep.errors import ConfigError, DimensionError, ValidationError
from symsep.states import DensityMatrix, is_ppt
from symsep.symmetry import (
    ChargeFamily,
    ChargeOperator,
    build_product_charge,
    build_sum_charge,
    is_symmetric,
    lift,
    nonselective_measure,
    resolve_levels,
    sector_decompose,
    sector_subspaces,
    sigma_z_levels,
    twirl,
    twirl_quadrature_oracle,
)
from symsep.ensembles import random_separable_matrix

N01 = ChargeOperator.from_levels([0, 1])


def _spectrum(n):
    return np.sort(np.linalg.eigvalsh(n.op))


def test_sector_decompose_examples(rng):
    s = sector_decompose(ChargeOperator.from_levels([0, 1, 1, 2]))
    assert list(s.charges) == [0, 1, 2]
    assert list(s.multiplicities) == [1, 2, 1]
    assert list(s.labels) == [0, 1, 1, 2]
    s = sector_decompose(ChargeOperator(np.eye(3)))
    assert list(s.multiplicities) == [3]
    h = rng.standard_normal((4, 4))
    h = h + h.T
    s = sector_decompose(ChargeOperator(h))
    assert list(s.multiplicities) == [1, 1, 1, 1]
    # projectors resolve the identity and are orthogonal
    ps = s.projectors
    assert np.linalg.norm(sum(ps) - np.eye(4)) < 1e-10
    assert np.linalg.norm(ps[0] @ ps[1]) < 1e-10


def test_grouping_tolerance():
    n = ChargeOperator.from_levels([0.0, 1.0, 1.0 + 1e-12])
    assert list(sector_decompose(n).multiplicities) == [1, 2]
    n = ChargeOperator.from_levels([0.0, 1.0, 1.0 + 1e-6], grouping_tol=1e-9)
    assert list(sector_decompose(n).multiplicities) == [1, 1, 1]


def test_charge_validation():
    with pytest.raises(ValidationError):
        ChargeOperator(np.array([[0, 1], [0, 0]]))
    with pytest.raises(DimensionError):
        ChargeOperator(np.zeros((2, 3)))


def test_resolve_levels():
    assert list(resolve_levels("range0", 3)) == [0, 1, 2]
    assert list(resolve_levels("range1", 3)) == [1, 2, 3]
    assert list(resolve_levels("sigma_z", 4)) == [2, 0, 0, -2]
    assert list(sigma_z_levels(1)) == [1, -1]
    with pytest.raises(DimensionError):
        resolve_levels("sigma_z", 3)
    with pytest.raises(ConfigError):
        resolve_levels("bogus", 3)
    with pytest.raises(DimensionError):
        resolve_levels([0, 1], 3)


def test_sum_charge_examples():
    n = build_sum_charge(N01, N01)
    assert np.array_equal(np.diag(n.op).real, [0, 1, 1, 2])
    nB = ChargeOperator.from_levels([0, 1, 2])
    n = build_sum_charge(ChargeOperator(np.zeros((2, 2))), nB)
    assert np.allclose(_spectrum(n), [0, 0, 1, 1, 2, 2])
    n = build_sum_charge(ChargeOperator.from_levels([0, 3]), ChargeOperator.from_levels([0, 1, 1, 2]))
    assert np.array_equal(np.diag(n.op).real, [0, 1, 1, 2, 3, 4, 4, 5])
    with pytest.raises(DimensionError):
        build_sum_charge(N01, N01, dims=(2, 3))


def test_product_charge_examples():
    assert np.array_equal(np.diag(build_product_charge(N01, N01).op).real, [0, 0, 0, 1])
    d = 4
    r = ChargeOperator.from_levels(range(d))
    expected = np.sort([i * j for i in range(d) for j in range(d)])
    assert np.allclose(_spectrum(build_product_charge(r, r)), expected)
    nB = ChargeOperator.from_levels([2, 5, 7])
    assert np.allclose(_spectrum(build_product_charge(ChargeOperator(np.eye(2)), nB)), [2, 2, 5, 5, 7, 7])


def test_family_rejects_noncommuting():
    with pytest.raises(ValidationError):
        ChargeFamily.custom([ChargeOperator(SZ), ChargeOperator(SX)])


def test_family_json_round_trip():
    f = family("product", (3, 3))
    g = ChargeFamily.from_dict(f.to_dict(), (3, 3))
    assert g.kind == "product"
    assert np.array_equal(g.members[0].op, f.members[0].op)
    f = ChargeFamily.from_dict({"kind": "sum", "members": [{"levels": "range1"}, {"levels": "range1"}]}, (2, 3))
    assert np.array_equal(np.diag(f.members[0].op).real, [2, 3, 4, 3, 4, 5])
    with pytest.raises(ConfigError):
        ChargeFamily.from_dict({"members": []}, (2, 2))
    with pytest.raises(DimensionError):
        ChargeFamily.from_dict({"kind": "sum", "members": [{"levels": [0, 1]}, {"levels": [0, 1]}]}, (2, 3))


def test_nonselective_examples(rng):
    rho = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
    n = build_sum_charge(N01, N01)
    assert np.array_equal(nonselective_measure(rho, n), rho)
    plus = np.full((2, 2), 0.5, dtype=complex)
    assert np.allclose(nonselective_measure(plus, ChargeOperator(SZ)), np.eye(2) / 2, atol=1e-15)
    a = np.sqrt(0.3)
    psi = a * ket(0, 0) + np.sqrt(0.7) * ket(1, 1)
    out = nonselective_measure(DensityMatrix.from_pure(psi, (2, 2)), n)
    assert isinstance(out, DensityMatrix)
    assert np.linalg.norm(out.mat - np.diag([0.3, 0, 0, 0.7])) <= 1e-12
    with pytest.raises(DimensionError):
        nonselective_measure(np.eye(3) / 3, n)


def test_nonselective_non_diagonal_charge(rng):
    # charge diagonal in the Hadamard basis
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    n = ChargeOperator(h @ np.diag([0, 1]) @ h)
    rho = random_density(2, rng)
    out = nonselective_measure(rho, n)
    expected = sum(p @ rho @ p for p in n.sectors.projectors)
    assert np.linalg.norm(out - expected) < 1e-12
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.linalg.norm(nonselective_measure(out, n) - out) < 1e-12


def test_twirl_examples():
    # qubit A against two qubits B, charge = number of ones
    f = family("sum", (2, 4), levels=([0, 1], [0, 1, 1, 2]))
    ghz = (ket(0, 0, 0) + ket(1, 1, 1)) / np.sqrt(2)
    out = twirl(np.outer(ghz, ghz.conj()), f)
    assert np.linalg.norm(out - np.diag([0.5, 0, 0, 0, 0, 0, 0, 0.5])) <= 1e-15
    w = (ket(0, 0, 1) + ket(0, 1, 0) + ket(1, 0, 0)) / np.sqrt(3)
    rho_w = np.outer(w, w.conj())
    assert np.linalg.norm(twirl(rho_w, f) - rho_w) <= 1e-15


@pytest.mark.parametrize("kind", ["sum", "product", "local"])
@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 3)])
def test_twirl_retraction(kind, dims, rng):
    f = family(kind, dims)
    for _ in range(20):
        rho = random_density(dims[0] * dims[1], rng)
        t = twirl(rho, f)
        assert all(qla.commutator_norm(t, m.op) <= 1e-8 for m in f.members)
        assert np.linalg.norm(twirl(t, f) - t) <= 1e-10
        assert not np.allclose(t, rho)
        assert all(is_symmetric(t, m) for m in f.members)


def test_twirl_order_independent(rng):
    f = family("local", (3, 4))
    rev = ChargeFamily.custom(f.members[::-1], f.dims)
    for _ in range(10):
        rho = random_density(12, rng)
        assert np.linalg.norm(twirl(rho, f) - twirl(rho, rev)) <= 1e-10


def test_twirl_linear(rng):
    f = family("product", (3, 3))
    for _ in range(10):
        a, b = random_density(9, rng), random_density(9, rng)
        p = rng.uniform()
        lhs = twirl(p * a + (1 - p) * b, f)
        assert np.linalg.norm(lhs - (p * twirl(a, f) + (1 - p) * twirl(b, f))) <= 1e-10


def test_twirl_requires_family():
    with pytest.raises(ConfigError):
        twirl(np.eye(2) / 2, N01)


def test_quadrature_examples(rng):
    f = family("sum", (2, 2))
    bell = (ket(0, 0) + ket(1, 1)) / np.sqrt(2)
    rho = np.outer(bell, bell)
    assert np.linalg.norm(twirl_quadrature_oracle(rho, f, 8) - twirl(rho, f)) <= 1e-8
    sym = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
    assert np.linalg.norm(twirl_quadrature_oracle(sym, f, 5) - sym) <= 1e-8
    # local family factorizes on product states
    fl = family("local", (2, 3))
    ra, rb = random_density(2, rng), random_density(3, rng)
    nA, nB = fl.local
    expected = np.kron(nonselective_measure(ra, nA), nonselective_measure(rb, nB))
    assert np.linalg.norm(twirl_quadrature_oracle(np.kron(ra, rb), fl, 4) - expected) <= 1e-8


def test_quadrature_rejects_non_integer_spectrum():
    f = ChargeFamily.custom([ChargeOperator.from_levels([0, 0.5])])
    with pytest.raises(ValidationError):
        twirl_quadrature_oracle(np.eye(2) / 2, f, 4)


@settings(max_examples=25, deadline=None)
@given(
    kind=st.sampled_from(["sum", "product", "local"]),
    dA=st.integers(1, 4),
    dB=st.integers(1, 4),
    seed=st.integers(0, 2**32 - 1),
)
def test_twirl_matches_quadrature(kind, dA, dB, seed):
    f = family(kind, (dA, dB))
    rho = random_density(dA * dB, np.random.default_rng(seed))
    diam = max(np.ptp(np.diag(m.op).real) for m in f.members)
    got = twirl_quadrature_oracle(rho, f, int(diam) + 1)
    assert np.linalg.norm(got - twirl(rho, f)) <= 1e-8


def test_is_symmetric_examples(rng):
    plus = np.full((2, 2), 0.5)
    assert not is_symmetric(plus, ChargeOperator(SZ))
    assert is_symmetric(np.diag([0.3, 0.7]), ChargeOperator(SZ))
    f = family("sum", (2, 2))
    assert is_symmetric(twirl(random_density(4, rng), f), f.members[0])


def test_sector_subspaces_examples():
    subs = sector_subspaces(family("sum", (2, 2)))
    assert [s.charge for s in subs] == [0, 1, 2]
    assert subs[0].pairs == ((0, 0),)
    assert subs[1].pairs == ((0, 1), (1, 0))
    assert subs[1].a_index == (0, 1) and subs[1].b_index == (0, 1)
    assert subs[0].basis_A(2).shape == (2, 1)
    subs = sector_subspaces(family("product", (3, 3)))
    two = next(s for s in subs if s.charge == 2)
    assert set(two.pairs) == {(1, 2), (2, 1)}
    assert two.a_index == (1, 2) and two.b_index == (1, 2)


def test_sector_subspaces_span_eigenspaces():
    f = family("product", (3, 4))
    for s in sector_subspaces(f):
        kets = [np.kron(np.eye(3)[i], np.eye(4)[j]) for i, j in s.pairs]
        assert all(np.allclose(f.members[0].op @ k, s.charge * k) for k in kets)
    assert sum(len(s.pairs) for s in sector_subspaces(f)) == 12


def test_sector_subspaces_errors():
    with pytest.raises(ConfigError):
        sector_subspaces(family("local", (2, 2)))
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    f = ChargeFamily.from_local("sum", ChargeOperator(h @ np.diag([0, 1]) @ h), N01)
    with pytest.raises(ValidationError):
        sector_subspaces(f)


def test_lift_dimension_check():
    assert lift(N01, (2, 3), 0).dim == 6
    with pytest.raises(DimensionError):
        lift(N01, (3, 3), 0)


def test_fidelity_monotone_under_measurement(rng):
    n = build_product_charge(ChargeOperator.from_levels([0, 1, 2]), ChargeOperator.from_levels([0, 1, 2]))
    for _ in range(200):
        a, b = random_density(9, rng), random_density(9, rng)
        before = qla.fidelity(a, b)
        after = qla.fidelity(nonselective_measure(a, n), nonselective_measure(b, n))
        assert after >= before - 1e-9


@pytest.mark.parametrize("kind", ["sum", "local"])
@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 2)])
def test_twirl_preserves_separability(kind, dims, rng):
    f = family(kind, dims)
    for _ in range(50):
        rho = random_separable_matrix(dims, 3, rng)
        assert is_ppt(twirl(rho, f), dims)
