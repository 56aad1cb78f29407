"""Seeded random-state ensembles.

Every sampler takes a ``numpy.random.Generator``. Reproducible streams come
from :class:`RngStream`, which keys a counter-based Philox generator by
``(seed, stream_id)``; experiments give each sample its own stream id so that
results do not depend on how samples are distributed over workers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionError
from .states import DensityMatrix, PureState
from .symmetry import ChargeFamily, sector_subspaces, twirl


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([int(self.seed) & (2**64 - 1), int(self.stream_id)])
        return np.random.Generator(np.random.Philox(ss))


def _gaussian_vectors(rng: np.random.Generator, d: int, count: int) -> np.ndarray:
    """``count`` complex standard Gaussian columns of length ``d``."""
    z = rng.standard_normal((2, d, count))
    return z[0] + 1j * z[1]


def _unit_columns(z: np.ndarray) -> np.ndarray:
    return z / np.linalg.norm(z, axis=0, keepdims=True)


def flat_simplex(rng: np.random.Generator, m: int) -> np.ndarray:
    """Uniform point on the probability simplex (normalized unit exponentials)."""
    e = rng.standard_exponential(m)
    return e / e.sum()


def default_mixture_size(dims: Sequence[int]) -> int:
    return int(np.prod(dims)) ** 2


def haar_pure(d: int, rng: np.random.Generator, dims=None) -> PureState:
    d = int(d)
    if d < 1:
        raise DimensionError("d must be positive")
    v = _unit_columns(_gaussian_vectors(rng, d, 1))[:, 0]
    if d == 1:
        v = np.ones(1, dtype=complex)
    return PureState(v, dims)


def induced_mixed(d: int, K: int, rng: np.random.Generator, dims=None) -> DensityMatrix:
    """Trace of a Haar pure state on ``d*K`` over the ``K``-dimensional ancilla."""
    g = _gaussian_vectors(rng, int(d), int(K))
    g /= np.linalg.norm(g)
    return DensityMatrix(g @ g.conj().T, dims)


def _product_mixture(dims: Sequence[int], m: int, rng: np.random.Generator) -> np.ndarray:
    dA, dB = int(dims[0]), int(dims[1])
    a = _unit_columns(_gaussian_vectors(rng, dA, m))
    b = _unit_columns(_gaussian_vectors(rng, dB, m))
    p = flat_simplex(rng, m)
    # columns |a_i>|b_i>
    prod = (a[:, None, :] * b[None, :, :]).reshape(dA * dB, m)
    rho = (prod * p) @ prod.conj().T
    return 0.5 * (rho + rho.conj().T)


def random_separable_matrix(dims, m: int | None, rng: np.random.Generator) -> np.ndarray:
    """Raw-array form of :func:`random_separable` (skips validation)."""
    m = default_mixture_size(dims) if m is None else int(m)
    if m < 1:
        raise ConfigError("mixture size m must be at least 1")
    return _product_mixture(dims, m, rng)


def random_separable(dims, m: int | None, rng: np.random.Generator) -> DensityMatrix:
    """Flat-weighted mixture of ``m`` Haar-random pure product states."""
    return DensityMatrix(random_separable_matrix(dims, m, rng), tuple(dims))


def random_sep_sym_matrix(dims, family: ChargeFamily, m, rng) -> np.ndarray:
    # nonselective measurement of the global charge(s)
    return twirl(random_separable_matrix(dims, m, rng), family)


def random_sep_sym(dims, family: ChargeFamily, m, rng) -> DensityMatrix:
    """Separable state measured nonselectively in the sectors of ``family``."""
    return DensityMatrix(random_sep_sym_matrix(dims, family, m, rng), tuple(dims))


def random_symsep_matrix(dims, family: ChargeFamily, m, rng) -> np.ndarray:
    local = family if family.kind == "local" else family.localized()
    return twirl(random_separable_matrix(dims, m, rng), local)


def random_symsep(dims, family: ChargeFamily, m, rng) -> DensityMatrix:
    """Separable state twirled by the LOCAL family (symmetrically separable).

    Sum and product families are replaced by their localization.
    """
    return DensityMatrix(random_symsep_matrix(dims, family, m, rng), tuple(dims))


def sector_rectangles(pairs) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Maximal index rectangles ``S_A x S_B`` contained in a set of ``(i, j)`` pairs.

    A product vector lies in a coordinate sector exactly when its support is
    such a rectangle.
    """
    allowed: dict[int, set[int]] = {}
    for i, j in pairs:
        allowed.setdefault(i, set()).add(j)
    rows = sorted(allowed)
    found = set()
    for r in range(1, len(rows) + 1):
        for sa in itertools.combinations(rows, r):
            sb = set.intersection(*(allowed[i] for i in sa))
            if not sb:
                continue
            # close S_A: every row compatible with all of S_B
            full_a = tuple(i for i in rows if sb <= allowed[i])
            found.add((full_a, tuple(sorted(sb))))
    rects = sorted(found)
    return [
        (a, b)
        for a, b in rects
        if not any(set(a) <= set(a2) and set(b) <= set(b2) and (a, b) != (a2, b2) for a2, b2 in rects)
    ]


def random_sector_hull_matrix(dims, family: ChargeFamily, m_per_sector, rng) -> np.ndarray:
    dA, dB = int(dims[0]), int(dims[1])
    subs = sector_subspaces(family)
    weights = flat_simplex(rng, len(subs))
    rho = np.zeros((dA * dB, dA * dB), dtype=complex)
    for w, sub in zip(weights, subs):
        rects = sector_rectangles(sub.pairs)
        m = len(sub.pairs) ** 2 if m_per_sector is None else int(m_per_sector)
        p = flat_simplex(rng, m)
        choice = rng.integers(len(rects), size=m)
        for pk, c in zip(p, choice):
            ia, ib = rects[c]
            a = np.zeros(dA, dtype=complex)
            b = np.zeros(dB, dtype=complex)
            a[list(ia)] = _unit_columns(_gaussian_vectors(rng, len(ia), 1))[:, 0]
            b[list(ib)] = _unit_columns(_gaussian_vectors(rng, len(ib), 1))[:, 0]
            v = np.kron(a, b)
            rho += (w * pk) * np.outer(v, v.conj())
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_sector_hull(dims, family: ChargeFamily, m_per_sector, rng) -> DensityMatrix:
    """Mixture over charge sectors of separable states living inside each sector.

    Each sector term mixes product vectors whose supports are maximal index
    rectangles inside the sector, so every term is a product state with a
    definite global charge: the output is N-symmetric and separable for sum
    and product charges alike.
    """
    return DensityMatrix(random_sector_hull_matrix(dims, family, m_per_sector, rng), tuple(dims))


ENSEMBLE_KINDS = ("haar_pure", "induced_mixed", "separable", "symsep", "sep_sym_measured", "sector_hull")


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    dims: tuple[int, ...]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ConfigError(f"unknown ensemble kind {self.kind!r}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if any(d < 1 for d in self.dims):
            raise ConfigError(f"invalid dims {self.dims}")
        if self.kind == "induced_mixed" and "K" not in self.params:
            raise ConfigError("induced_mixed ensemble needs params.K")
        if self.kind in ("separable", "symsep", "sep_sym_measured", "sector_hull") and len(self.dims) != 2:
            raise ConfigError(f"{self.kind} ensemble needs bipartite dims")

    @property
    def needs_charge(self) -> bool:
        return self.kind in ("symsep", "sep_sym_measured", "sector_hull")

    def mixture_size(self) -> int | None:
        m = self.params.get("m")
        return None if m is None else int(m)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dims": list(self.dims), "params": dict(self.params)}

    @classmethod
    def from_dict(cls, obj: dict) -> "EnsembleSpec":
        for key in ("kind", "dims"):
            if key not in obj:
                raise ConfigError(f"ensemble spec missing key {key!r}")
        params = dict(obj.get("params", {}))
        return cls(obj["kind"], tuple(obj["dims"]), params)

    def charge_family(self, fallback: ChargeFamily | None = None) -> ChargeFamily | None:
        if "charge" in self.params:
            return ChargeFamily.from_dict(self.params["charge"], self.dims)
        return fallback


def sample_matrix(spec: EnsembleSpec, rng: np.random.Generator, family: ChargeFamily | None = None) -> np.ndarray:
    """Draw one state from ``spec`` as a raw density array."""
    family = spec.charge_family(family)
    if spec.needs_charge and family is None:
        raise ConfigError(f"{spec.kind} ensemble needs a charge family")
    if family is not None and spec.needs_charge and family.dim != int(np.prod(spec.dims)):
        raise DimensionError(f"charge dimension {family.dim} does not match ensemble dims {spec.dims}")
    d = int(np.prod(spec.dims))
    m = spec.mixture_size()
    if spec.kind == "haar_pure":
        v = haar_pure(d, rng).vec
        return np.outer(v, v.conj())
    if spec.kind == "induced_mixed":
        return induced_mixed(d, int(spec.params["K"]), rng).mat
    if spec.kind == "separable":
        return random_separable_matrix(spec.dims, m, rng)
    if spec.kind == "symsep":
        return random_symsep_matrix(spec.dims, family, m, rng)
    if spec.kind == "sep_sym_measured":
        return random_sep_sym_matrix(spec.dims, family, m, rng)
    return random_sector_hull_matrix(spec.dims, family, spec.params.get("m_per_sector"), rng)


def sample(spec: EnsembleSpec, rng: np.random.Generator, family: ChargeFamily | None = None) -> DensityMatrix:
    return DensityMatrix(sample_matrix(spec, rng, family), spec.dims)
