"""Validated quantum states, entropies and purification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qla
from .errors import DimensionError, ValidationError

# eigenvalues at or below this are treated as exact zeros in entropies
ENTROPY_CLIP = 1e-12


def _dims_tuple(dims, n: int) -> tuple[int, ...]:
    if dims is None:
        return (n,)
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise DimensionError(f"dimensions must be positive, got {dims}")
    if int(np.prod(dims)) != n:
        raise DimensionError(f"dims {dims} do not multiply to {n}")
    return dims


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DensityMatrix:
    """A density matrix, validated on construction.

    ``dims`` lists the local dimensions, ``(d_A, d_B)`` for bipartite states.
    """

    mat: np.ndarray
    dims: tuple[int, ...] = field(default=None)
    tol: float = field(default=qla.TOL, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got {m.shape}")
        object.__setattr__(self, "dims", _dims_tuple(self.dims, m.shape[0]))
        if qla.hermiticity_error(m) > self.tol:
            raise ValidationError("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        if abs(np.trace(m).real - 1.0) > self.tol:
            raise ValidationError(f"density matrix trace {np.trace(m).real!r} != 1")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -self.tol:
            raise ValidationError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "mat", _readonly(m))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def from_pure(cls, vec, dims=None) -> "DensityMatrix":
        v = np.asarray(getattr(vec, "vec", vec), dtype=complex).ravel()
        if dims is None:
            dims = getattr(vec, "dims", None)
        return cls(np.outer(v, v.conj()), dims)

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityMatrix":
        d = int(np.prod(dims))
        return cls(np.eye(d) / d, dims)

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "matrix": qla.matrix_to_dict(self.mat)}

    @classmethod
    def from_dict(cls, obj: dict) -> "DensityMatrix":
        try:
            return cls(qla.matrix_from_dict(obj["matrix"]), obj["dims"])
        except KeyError as exc:
            raise ValidationError(f"density JSON missing key {exc.args[0]!r}") from None


@dataclass(frozen=True)
class PureState:
    vec: np.ndarray
    dims: tuple[int, ...] = None

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=complex).ravel()
        object.__setattr__(self, "dims", _dims_tuple(self.dims, v.size))
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValidationError(f"state vector norm {np.linalg.norm(v)!r} != 1")
        object.__setattr__(self, "vec", _readonly(v))

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self.vec, self.dims)


def entropy_of_spectrum(w: np.ndarray) -> float:
    """Shannon entropy in bits of an eigenvalue list, with ``0 log 0 = 0``."""
    w = np.asarray(w, dtype=float)
    w = w[w > ENTROPY_CLIP]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def von_neumann_entropy(rho) -> float:
    """Von Neumann entropy in bits."""
    m = qla.as_matrix(rho)
    return entropy_of_spectrum(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))


def schmidt_coefficients(psi, dims=None) -> np.ndarray:
    v = np.asarray(getattr(psi, "vec", psi), dtype=complex).ravel()
    dims = tuple(dims or getattr(psi, "dims", ()))
    if len(dims) != 2 or dims[0] * dims[1] != v.size:
        raise DimensionError(f"bipartite dims {dims} incompatible with vector of size {v.size}")
    s = np.linalg.svd(v.reshape(dims), compute_uv=False)
    return s**2


def entanglement_entropy(psi, dims=None) -> float:
    """Entropy of the reduced state on A of a bipartite pure state."""
    return entropy_of_spectrum(schmidt_coefficients(psi, dims))


def purify(rho) -> PureState:
    """Canonical purification ``sum_i sqrt(l_i) |v_i> (x) |i>`` on ``d * d``.

    The ancilla is the second tensor factor.
    """
    m = qla.as_matrix(rho)
    d = m.shape[0]
    eig = qla.hermitian_eig(m)
    lam = np.clip(eig.eigenvalues, 0.0, None)
    # column i of V scaled by sqrt(l_i) gives the (system, ancilla) coefficient matrix
    coeff = eig.eigenvectors * np.sqrt(lam)
    vec = coeff.reshape(d * d)
    vec = vec / np.linalg.norm(vec)
    return PureState(vec, (d, d))


def ppt_min_eigenvalue(rho, dims=None) -> float:
    """Smallest eigenvalue of the partial transpose on the last subsystem."""
    m = qla.as_matrix(rho)
    dims = tuple(dims or getattr(rho, "dims", ()))
    if len(dims) < 2:
        raise DimensionError("bipartite dims are required for the PPT test")
    pt = qla.partial_transpose(m, dims, sys=len(dims) - 1)
    return float(np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))[0])


def is_ppt(rho, dims=None, tol: float = qla.TOL) -> bool:
    return ppt_min_eigenvalue(rho, dims) >= -tol
