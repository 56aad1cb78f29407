"""Number entanglement, the symmetric-separability decision, and SEP_N channels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qla
from .errors import ConfigError, DimensionError, ValidationError
from .states import DensityMatrix, entropy_of_spectrum, is_ppt, ppt_min_eigenvalue
from .symmetry import ChargeFamily, ChargeOperator, SectorDecomposition, lift

#: NE values at or below this (bits) count as zero.
NE_TOL = 1e-8
#: PPT is equivalent to separability up to this local-dimension product.
PPT_EXACT_DIM = 6


def _entropy(m: np.ndarray) -> float:
    return entropy_of_spectrum(np.linalg.eigvalsh(m))


def local_sectors(n, dims: Sequence[int], site: int = 0) -> SectorDecomposition:
    n = n if isinstance(n, ChargeOperator) else ChargeOperator(n)
    return lift(n, dims, site).sectors


def number_entanglement(rho, nA, dims=None, side: int = 0) -> float:
    """Entropy increase (bits) from nonselectively measuring a local charge.

    ``nA`` acts on subsystem ``side`` (0 = A) and is lifted with identities;
    a precomputed :class:`SectorDecomposition` of the lifted charge is also
    accepted.
    """
    m = qla.as_matrix(rho)
    if isinstance(nA, SectorDecomposition):
        sec = nA
    else:
        dims = tuple(dims or getattr(rho, "dims", ()))
        if len(dims) < 2:
            raise DimensionError("number_entanglement needs bipartite dims")
        if int(np.prod(dims)) != m.shape[0]:
            raise DimensionError(f"dims {dims} do not match state dimension {m.shape[0]}")
        sec = local_sectors(nA, dims, side)
    if sec.dim != m.shape[0]:
        raise DimensionError(f"charge dimension {sec.dim} does not match state dimension {m.shape[0]}")
    return _entropy(sec.measure(m)) - _entropy(m)


# --- symmetric separability ------------------------------------------------------------

SYMSEP, NOT_SYMSEP, UNKNOWN = "symsep", "not_symsep", "unknown"


@dataclass
class SymsepVerdict:
    status: str
    evidence: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"status": self.status, "evidence": list(self.evidence)}


def _local_blocks(m: np.ndarray, nA: ChargeOperator, nB: ChargeOperator):
    """Yield ``(dA_block, dB_block, block)`` for every pair of local charge sectors."""
    sa, sb = nA.sectors, nB.sectors
    va = sa.basis if sa.basis is not None else np.eye(nA.dim)
    vb = sb.basis if sb.basis is not None else np.eye(nB.dim)
    for i in range(len(sa.charges)):
        ca = va[:, sa.labels == i]
        for j in range(len(sb.charges)):
            cb = vb[:, sb.labels == j]
            p = np.kron(ca, cb)
            yield ca.shape[1], cb.shape[1], p.conj().T @ m @ p


def decide_symsep(rho, family: ChargeFamily, dims=None, tol: float = NE_TOL) -> SymsepVerdict:
    """Decide symmetric separability for the localization of ``family``.

    Necessary tests: commutation with both local charges, NE, PPT. Sufficient
    test: every nonzero local-sector block ``h_A^a (x) h_B^b`` either has a
    one-dimensional factor or is PPT with ``dim <= 6``; such blocks are
    separable into products of locally symmetric states.
    """
    if family.local is None:
        raise ConfigError("decide_symsep needs a family with local charges")
    nA, nB = family.local
    m = qla.as_matrix(rho)
    dims = tuple(dims or getattr(rho, "dims", None) or family.dims)
    if dims != (nA.dim, nB.dim) or m.shape[0] != nA.dim * nB.dim:
        raise DimensionError(f"state of dimension {m.shape[0]} does not match local charges {(nA.dim, nB.dim)}")
    ev = []
    for site, n in ((0, nA), (1, nB)):
        c = qla.commutator_norm(m, lift(n, dims, site).op)
        if c > qla.TOL:
            ev.append(f"commutation: ||[rho, {n.label}]|| = {c:.3e}")
    if ev:
        return SymsepVerdict(NOT_SYMSEP, ev)
    ev.append("commutation: rho commutes with both local charges")

    ne = number_entanglement(m, nA, dims)
    if ne > tol:
        return SymsepVerdict(NOT_SYMSEP, ev + [f"NE = {ne:.6e} bits > {tol:g}"])
    ev.append(f"NE = {ne:.3e} bits")

    lo = ppt_min_eigenvalue(m, dims)
    if lo < -qla.TOL:
        return SymsepVerdict(NOT_SYMSEP, ev + [f"NPT: min eigenvalue of partial transpose {lo:.6e}"])
    ev.append(f"PPT: min eigenvalue of partial transpose {lo:.3e}")

    for da, db, block in _local_blocks(m, nA, nB):
        if np.linalg.norm(block) <= qla.TOL or min(da, db) == 1:
            continue
        if da * db > PPT_EXACT_DIM:
            return SymsepVerdict(UNKNOWN, ev + [f"local sector block {da}x{db} exceeds PPT-exact size"])
        if not is_ppt(block, (da, db)):
            # unreachable for a PPT state; kept as a guard
            return SymsepVerdict(NOT_SYMSEP, ev + [f"NPT local sector block {da}x{db}"])
    ev.append(f"PPT-in-range: every local sector block is separable (d_A*d_B = {dims[0] * dims[1]})")
    return SymsepVerdict(SYMSEP, ev)


# --- separable channels ----------------------------------------------------------------


@dataclass(frozen=True)
class SepChannel:
    """Separable operation with product Kraus operators ``K_A^j (x) K_B^j``."""

    kraus_pairs: tuple[tuple[np.ndarray, np.ndarray], ...]
    tol: float = field(default=qla.TOL, repr=False, compare=False)

    def __post_init__(self):
        pairs = tuple((np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)) for a, b in self.kraus_pairs)
        if not pairs:
            raise ValidationError("a channel needs at least one Kraus pair")
        shapes = {(a.shape, b.shape) for a, b in pairs}
        if len(shapes) != 1:
            raise DimensionError("Kraus pairs have inconsistent shapes")
        object.__setattr__(self, "kraus_pairs", pairs)
        ks = self.kraus_ops()
        d = ks[0].shape[1]
        s = sum(k.conj().T @ k for k in ks)
        err = np.linalg.norm(s - np.eye(d))
        if err > self.tol:
            raise ValidationError(f"Kraus set is not trace preserving (error {err:.3e})")

    def kraus_ops(self) -> list[np.ndarray]:
        return [np.kron(a, b) for a, b in self.kraus_pairs]

    @property
    def dims(self) -> tuple[int, int]:
        a, b = self.kraus_pairs[0]
        return a.shape[1], b.shape[1]

    def to_dict(self) -> dict:
        return {"kraus_pairs": [[qla.matrix_to_dict(a), qla.matrix_to_dict(b)] for a, b in self.kraus_pairs]}

    @classmethod
    def from_dict(cls, obj: dict) -> "SepChannel":
        return cls(tuple((qla.matrix_from_dict(a), qla.matrix_from_dict(b)) for a, b in obj["kraus_pairs"]))


def apply_sep_channel(rho, ch: SepChannel):
    m = qla.as_matrix(rho)
    ks = ch.kraus_ops()
    if ks[0].shape[1] != m.shape[0]:
        raise DimensionError(f"channel input dimension {ks[0].shape[1]} != state dimension {m.shape[0]}")
    out = sum(k @ m @ k.conj().T for k in ks)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out, rho.dims)
    return out


def is_symmetric_channel(ch: SepChannel, n, tol: float = 1e-9) -> bool:
    op = n.op if isinstance(n, ChargeOperator) else np.asarray(n)
    return all(qla.commutator_norm(k, op) <= tol for k in ch.kraus_ops())

