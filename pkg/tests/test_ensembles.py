import numpy as np
import pytest

from conftest import family
from symsep import qla
from symsep.ensembles import (
    EnsembleSpec,
    RngStream,
    default_mixture_size,
    flat_simplex,
    haar_pure,
    induced_mixed,
    random_sector_hull,
    random_sep_sym,
    random_separable,
    random_symsep,
    sample,
    sample_matrix,
    sector_rectangles,
)
from symsep.errors import ConfigError, DimensionError
from symsep.states import DensityMatrix, entanglement_entropy, is_ppt, ppt_min_eigenvalue
from symsep.symmetry import ChargeFamily, ChargeOperator, twirl
from symsep.witness import SYMSEP, decide_symsep, number_entanglement


def _purity(rho):
    m = qla.as_matrix(rho)
    return float(np.real(np.trace(m @ m)))


def test_rng_stream_deterministic():
    a = RngStream(7, 3).generator().standard_normal(5)
    b = RngStream(7, 3).generator().standard_normal(5)
    c = RngStream(7, 4).generator().standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_flat_simplex():
    p = flat_simplex(np.random.default_rng(0), 10)
    assert p.shape == (10,) and np.all(p > 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    assert default_mixture_size((2, 3)) == 36


def test_haar_examples(rng):
    assert np.array_equal(haar_pure(1, rng).vec, [1])
    n = 100_000
    g = rng.standard_normal((n, 4)) + 1j * rng.standard_normal((n, 4))
    p0 = np.array([abs(haar_pure(4, np.random.default_rng(i)).vec[0]) ** 2 for i in range(2000)])
    # batched check of the same transform at large n
    big = np.abs(g[:, 0]) ** 2 / np.sum(np.abs(g) ** 2, axis=1)
    for v in (p0, big):
        assert abs(v.mean() - 0.25) <= 3 * v.std() / np.sqrt(v.size)
    with pytest.raises(DimensionError):
        haar_pure(0, rng)


def test_haar_generic_entanglement_near_maximal(rng):
    ee = [entanglement_entropy(haar_pure(128, rng).vec, (2, 64)) for _ in range(200)]
    assert np.mean(ee) > 0.98


def test_induced_examples(rng):
    rho = induced_mixed(3, 1, rng)
    assert _purity(rho) == pytest.approx(1.0, abs=1e-12)
    for _ in range(100_000):
        induced_mixed(2, 2, rng)  # validation raises on failure
    means = [np.mean([_purity(induced_mixed(4, K, rng)) for _ in range(400)]) for K in (1, 2, 4, 16, 64)]
    assert all(a > b for a, b in zip(means, means[1:]))
    assert means[-1] == pytest.approx(0.25, abs=0.02)


def test_separable_examples(rng):
    rho = random_separable((2, 3), 1, rng)
    assert _purity(rho) == pytest.approx(1.0, abs=1e-12)
    # a product pure state symmetric under the local charges has NE 0
    nA = ChargeOperator.from_levels([0, 0])
    assert abs(number_entanglement(rho, nA)) <= 1e-9
    for m in (1, 2, 5, None):
        for _ in range(50):
            assert ppt_min_eigenvalue(random_separable((2, 2), m, rng), (2, 2)) >= -1e-9
    means = [np.mean([_purity(random_separable((3, 3), m, rng)) for _ in range(200)]) for m in (1, 2, 4, 16)]
    assert all(a > b for a, b in zip(means, means[1:]))
    with pytest.raises(ConfigError):
        random_separable((2, 2), 0, rng)


def test_sep_sym_examples(rng):
    f = family("sum", (2, 2))
    for _ in range(50):
        rho = random_sep_sym((2, 2), f, None, rng)
        assert qla.commutator_norm(rho.mat, f.members[0].op) <= 1e-9
        assert is_ppt(rho, (2, 2))
    fp = family("product", (3, 3))
    rho = random_sep_sym((3, 3), fp, None, rng)
    assert qla.commutator_norm(rho.mat, fp.members[0].op) <= 1e-9
    assert np.linalg.norm(twirl(rho, fp).mat - rho.mat) <= 1e-12


@pytest.mark.parametrize("kind", ["sum", "local"])
@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 2)])
def test_sep_sym_ppt_small_dims(kind, dims, rng):
    f = family(kind, dims)
    for _ in range(100):
        assert is_ppt(random_sep_sym(dims, f, None, rng), dims)


def test_sector_rectangles():
    assert sector_rectangles([(0, 0)]) == [((0,), (0,))]
    assert sector_rectangles([(0, 1), (1, 0)]) == [((0,), (1,)), ((1,), (0,))]
    # product charge zero sector of range0 3x3: row 0 or column 0
    zero = [(0, 0), (0, 1), (0, 2), (1, 0), (2, 0)]
    assert sector_rectangles(zero) == [((0,), (0, 1, 2)), ((0, 1, 2), (0,))]
    full = [(i, j) for i in range(2) for j in range(3)]
    assert sector_rectangles(full) == [((0, 1), (0, 1, 2))]


@pytest.mark.parametrize("kind", ["sum", "product"])
@pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 2)])
def test_sector_hull_symmetric_and_ppt(kind, dims, rng):
    f = family(kind, dims)
    for _ in range(100):
        rho = random_sector_hull(dims, f, None, rng)
        assert qla.commutator_norm(rho.mat, f.members[0].op) <= 1e-9
        assert is_ppt(rho, dims)
        assert number_entanglement(rho, f.local[0]) >= -1e-9


def test_sector_hull_nondegenerate_is_diagonal(rng):
    f = ChargeFamily.from_local("sum", ChargeOperator.from_levels([0, 1, 2]), ChargeOperator.from_levels([0, 3, 6]))
    for _ in range(10):
        m = random_sector_hull((3, 3), f, 4, rng).mat
        assert np.linalg.norm(m - np.diag(np.diag(m))) <= 1e-15


def test_symsep_examples(rng):
    for kind in ("sum", "product", "local"):
        f = family(kind, (2, 2))
        for _ in range(30):
            rho = random_symsep((2, 2), f, None, rng)
            nA, nB = f.local
            assert number_entanglement(rho, nA) <= 1e-8
            assert qla.commutator_norm(rho.mat, np.kron(nA.op, np.eye(2))) <= 1e-12
            assert qla.commutator_norm(rho.mat, np.kron(np.eye(2), nB.op)) <= 1e-12
            assert decide_symsep(rho, f).status == SYMSEP


def test_all_samplers_validate(rng):
    f = family("sum", (8, 8))
    for fn in (random_separable, random_sep_sym, random_symsep, random_sector_hull):
        args = ((8, 8), 64, rng) if fn is random_separable else ((8, 8), f, 64, rng)
        assert isinstance(fn(*args), DensityMatrix)


def test_spec_json_and_errors():
    spec = EnsembleSpec.from_dict({"kind": "induced_mixed", "dims": [2, 2], "params": {"K": 3}})
    assert EnsembleSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ConfigError, match="dims"):
        EnsembleSpec.from_dict({"kind": "haar_pure"})
    with pytest.raises(ConfigError):
        EnsembleSpec("bogus", (2,))
    with pytest.raises(ConfigError, match="K"):
        EnsembleSpec("induced_mixed", (2, 2))
    with pytest.raises(ConfigError):
        EnsembleSpec("separable", (4,))


def test_sample_dispatch(rng):
    f = family("product", (2, 3))
    for kind in ("haar_pure", "separable", "symsep", "sep_sym_measured", "sector_hull"):
        rho = sample(EnsembleSpec(kind, (2, 3)), rng, f)
        assert rho.dims == (2, 3)
    assert sample(EnsembleSpec("induced_mixed", (2, 3), {"K": 2}), rng).dim == 6
    with pytest.raises(ConfigError):
        sample_matrix(EnsembleSpec("symsep", (2, 3)), rng)
    with pytest.raises(DimensionError):
        sample_matrix(EnsembleSpec("symsep", (2, 2)), rng, f)
    spec = EnsembleSpec("symsep", (2, 2), {"charge": {"kind": "sum", "members": [{"levels": "range0"}] * 2}})
    assert sample(spec, rng).dims == (2, 2)


def test_sampling_deterministic():
    f = family("sum", (2, 3))
    spec = EnsembleSpec("sep_sym_measured", (2, 3))
    a = sample_matrix(spec, RngStream(11, 5).generator(), f)
    b = sample_matrix(spec, RngStream(11, 5).generator(), f)
    assert np.array_equal(a, b)
