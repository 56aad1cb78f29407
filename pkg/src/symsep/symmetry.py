"""Charge operators, charge sectors, nonselective measurement and the twirl."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from . import qla
from .errors import ConfigError, DimensionError, ValidationError
from .states import DensityMatrix


def _is_diagonal(m: np.ndarray) -> bool:
    return not np.any(m - np.diag(np.diag(m)))


def group_eigenvalues(w: np.ndarray, tol: float) -> np.ndarray:
    """Label ascending eigenvalues so that values within ``tol * max(1, |w|max)`` chain together."""
    if w.size == 0:
        return np.zeros(0, dtype=int)
    scale = tol * max(1.0, float(np.max(np.abs(w))))
    order = np.argsort(w, kind="stable")
    labels = np.empty(w.size, dtype=int)
    cur = 0
    labels[order[0]] = 0
    for prev, idx in zip(order[:-1], order[1:]):
        if w[idx] - w[prev] > scale:
            cur += 1
        labels[idx] = cur
    return labels


@dataclass(frozen=True)
class SectorDecomposition:
    """Grouped spectral decomposition of a Hermitian charge.

    ``basis`` holds orthonormal eigenvectors as columns and ``labels[i]`` is the
    sector index of column ``i``; ``charges[k]`` is the representative charge of
    sector ``k``. ``basis`` is ``None`` when the charge is diagonal in the
    computational basis.
    """

    charges: np.ndarray
    multiplicities: np.ndarray
    labels: np.ndarray
    basis: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.labels.size

    @cached_property
    def mask(self) -> np.ndarray:
        return self.labels[:, None] == self.labels[None, :]

    @property
    def projectors(self) -> list[np.ndarray]:
        out = []
        for k in range(len(self.charges)):
            cols = self.labels == k
            if self.basis is None:
                out.append(np.diag(cols.astype(complex)))
            else:
                v = self.basis[:, cols]
                out.append(v @ v.conj().T)
        return out

    def measure(self, m: np.ndarray) -> np.ndarray:
        """``sum_k P_k m P_k`` for a raw square array."""
        if m.shape != (self.dim, self.dim):
            raise DimensionError(f"operator of shape {m.shape} does not match sector dimension {self.dim}")
        if self.basis is None:
            return np.where(self.mask, m, 0.0)
        v = self.basis
        inner = np.where(self.mask, v.conj().T @ m @ v, 0.0)
        return v @ inner @ v.conj().T


@dataclass(frozen=True)
class ChargeOperator:
    op: np.ndarray
    label: str = "N"
    grouping_tol: float = 1e-9

    def __post_init__(self):
        m = np.asarray(self.op, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"charge must be square, got {m.shape}")
        if qla.hermiticity_error(m) > qla.TOL:
            raise ValidationError(f"charge {self.label!r} is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "op", m)

    @classmethod
    def from_levels(cls, levels: Sequence[float], label: str = "N", grouping_tol: float = 1e-9):
        return cls(np.diag(np.asarray(levels, dtype=float)), label, grouping_tol)

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return _is_diagonal(self.op)

    @cached_property
    def sectors(self) -> SectorDecomposition:
        # recomputation is deterministic, so the memo is safe to race on
        return sector_decompose(self)

    def to_dict(self) -> dict:
        return {"label": self.label, "matrix": qla.matrix_to_dict(self.op), "grouping_tol": self.grouping_tol}

    @classmethod
    def from_dict(cls, obj: dict, dim: int | None = None) -> "ChargeOperator":
        label = obj.get("label", "N")
        tol = float(obj.get("grouping_tol", 1e-9))
        if "matrix" in obj:
            return cls(qla.matrix_from_dict(obj["matrix"]), label, tol)
        if "levels" in obj:
            return cls.from_levels(resolve_levels(obj["levels"], dim), label, tol)
        raise ConfigError(f"charge {label!r} needs a 'matrix' or 'levels' key")


def resolve_levels(levels, dim: int | None) -> np.ndarray:
    """Expand a level list or a symbolic level scheme for dimension ``dim``.

    Schemes: ``"range0"`` = 0..d-1, ``"range1"`` = 1..d, ``"sigma_z"`` = the
    diagonal of a sum of Pauli-Z over log2(d) qubits.
    """
    if not isinstance(levels, str):
        out = np.asarray(levels, dtype=float)
        if dim is not None and out.size != dim:
            raise DimensionError(f"{out.size} levels given for a {dim}-dimensional subsystem")
        return out
    if dim is None:
        raise ConfigError(f"symbolic levels {levels!r} need a subsystem dimension")
    if levels == "range0":
        return np.arange(dim, dtype=float)
    if levels == "range1":
        return np.arange(1, dim + 1, dtype=float)
    if levels == "sigma_z":
        q = int(round(np.log2(dim)))
        if 2**q != dim:
            raise DimensionError(f"sigma_z levels need a power-of-two dimension, got {dim}")
        return sigma_z_levels(q)
    raise ConfigError(f"unknown level scheme {levels!r}")


def sigma_z_levels(q: int) -> np.ndarray:
    """Diagonal of ``sum_i Z_i`` on ``q`` qubits, computational basis order."""
    bits = (np.arange(2**q)[:, None] >> np.arange(q - 1, -1, -1)[None, :]) & 1
    return (q - 2 * bits.sum(axis=1)).astype(float)


def sector_decompose(n: ChargeOperator) -> SectorDecomposition:
    n = n if isinstance(n, ChargeOperator) else ChargeOperator(n)
    if n.is_diagonal:
        w = np.diag(n.op).real.copy()
        basis = None
    else:
        eig = qla.hermitian_eig(n.op)
        w, basis = eig.eigenvalues, eig.eigenvectors
    labels = group_eigenvalues(w, n.grouping_tol)
    k = labels.max() + 1 if labels.size else 0
    charges = np.array([w[labels == i].mean() for i in range(k)])
    # order sectors by increasing charge
    order = np.argsort(charges, kind="stable")
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    labels = rank[labels]
    charges = charges[order]
    mult = np.bincount(labels, minlength=k)
    for a in (charges, mult, labels):
        a.setflags(write=False)
    return SectorDecomposition(charges, mult, labels, basis)


def build_sum_charge(nA: ChargeOperator, nB: ChargeOperator, dims=None, label: str = "N+") -> ChargeOperator:
    _check_local(nA, nB, dims)
    op = np.kron(nA.op, np.eye(nB.dim)) + np.kron(np.eye(nA.dim), nB.op)
    return ChargeOperator(op, label, max(nA.grouping_tol, nB.grouping_tol))


def build_product_charge(nA: ChargeOperator, nB: ChargeOperator, dims=None, label: str = "Nx") -> ChargeOperator:
    _check_local(nA, nB, dims)
    return ChargeOperator(np.kron(nA.op, nB.op), label, max(nA.grouping_tol, nB.grouping_tol))


def lift(n: ChargeOperator, dims: Sequence[int], site: int) -> ChargeOperator:
    """Embed a local charge acting on subsystem ``site`` into the full space."""
    dims = tuple(int(d) for d in dims)
    if dims[site] != n.dim:
        raise DimensionError(f"charge of dimension {n.dim} cannot act on subsystem {site} of dims {dims}")
    mats = [np.eye(d) for d in dims]
    mats[site] = n.op
    return ChargeOperator(qla.kron_all(mats), f"{n.label}@{site}", n.grouping_tol)


def _check_local(nA: ChargeOperator, nB: ChargeOperator, dims) -> None:
    if dims is not None and (int(dims[0]), int(dims[1])) != (nA.dim, nB.dim):
        raise DimensionError(f"local charges of dimension ({nA.dim}, {nB.dim}) do not match dims {tuple(dims)}")


FAMILY_KINDS = ("sum", "product", "local", "custom")


@dataclass(frozen=True)
class ChargeFamily:
    """A commuting set of charges on a bipartite space.

    For the ``sum``, ``product`` and ``local`` kinds the family is generated by
    the local charges ``(N_A, N_B)`` stored in ``local``; ``members`` are the
    full-space operators the twirl averages over. ``custom`` families carry
    arbitrary commuting members and no local parts.
    """

    kind: str
    members: tuple[ChargeOperator, ...]
    local: tuple[ChargeOperator, ChargeOperator] | None = None
    dims: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ConfigError(f"unknown charge family kind {self.kind!r}")
        if not self.members:
            raise ConfigError("charge family needs at least one member")
        d = self.members[0].dim
        if any(m.dim != d for m in self.members):
            raise DimensionError("charge family members have different dimensions")
        if self.dims is None:
            object.__setattr__(self, "dims", (d,))
        for a, b in itertools.combinations(self.members, 2):
            if qla.commutator_norm(a.op, b.op) > qla.TOL:
                raise ValidationError(f"charges {a.label!r} and {b.label!r} do not commute")

    @classmethod
    def from_local(cls, kind: str, nA: ChargeOperator, nB: ChargeOperator) -> "ChargeFamily":
        dims = (nA.dim, nB.dim)
        if kind == "sum":
            members = (build_sum_charge(nA, nB),)
        elif kind == "product":
            members = (build_product_charge(nA, nB),)
        elif kind == "local":
            members = (lift(nA, dims, 0), lift(nB, dims, 1))
        else:
            raise ConfigError(f"kind {kind!r} cannot be built from local charges")
        return cls(kind, members, (nA, nB), dims)

    @classmethod
    def custom(cls, members: Sequence[ChargeOperator], dims=None) -> "ChargeFamily":
        return cls("custom", tuple(members), None, tuple(dims) if dims is not None else None)

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def localized(self) -> "ChargeFamily":
        """The local family ``{N_A (x) 1, 1 (x) N_B}`` generated by the same local charges."""
        if self.local is None:
            raise ConfigError("custom charge families have no localization")
        return ChargeFamily.from_local("local", *self.local)

    @cached_property
    def joint_sectors(self) -> SectorDecomposition:
        """Common refinement of all members' sectors."""
        return _joint_sectors(self.members)

    def to_dict(self) -> dict:
        if self.local is not None:
            return {"kind": self.kind, "members": [n.to_dict() for n in self.local]}
        return {"kind": self.kind, "members": [n.to_dict() for n in self.members], "dims": list(self.dims)}

    @classmethod
    def from_dict(cls, obj: dict, dims=None) -> "ChargeFamily":
        """Parse ``{"kind": ..., "members": [...]}``.

        For ``sum``/``product``/``local`` the two members are the LOCAL charges
        ``N_A`` and ``N_B``; a member may give ``levels`` (a list or a symbolic
        scheme) instead of a matrix, resolved against ``dims``.
        """
        try:
            kind = obj["kind"]
            members = obj["members"]
        except KeyError as exc:
            raise ConfigError(f"charge family JSON missing key {exc.args[0]!r}") from None
        dims = dims if dims is not None else obj.get("dims")
        if kind == "custom":
            total = int(np.prod(dims)) if dims is not None else None
            ops = [ChargeOperator.from_dict(m, total) for m in members]
            return cls.custom(ops, dims)
        if len(members) != 2:
            raise ConfigError(f"{kind!r} charge family needs exactly two local members")
        dA, dB = (None, None) if dims is None else (int(dims[0]), int(dims[1]))
        nA = ChargeOperator.from_dict(members[0], dA)
        nB = ChargeOperator.from_dict(members[1], dB)
        if dims is not None and (nA.dim, nB.dim) != (dA, dB):
            raise DimensionError(f"local charges ({nA.dim}, {nB.dim}) do not match dims {tuple(dims)}")
        return cls.from_local(kind, nA, nB)


def _joint_sectors(members: Sequence[ChargeOperator]) -> SectorDecomposition:
    if all(m.is_diagonal for m in members):
        keys = np.stack([m.sectors.labels for m in members], axis=1)
        _, labels = np.unique(keys, axis=0, return_inverse=True)
        labels = labels.ravel()
        k = labels.max() + 1
        charges = np.arange(k, dtype=float)
        return SectorDecomposition(charges, np.bincount(labels, minlength=k), labels, None)
    # generic commuting set: diagonalize a random combination, then split by members
    rng = np.random.default_rng(0)
    h = sum(c * m.op for c, m in zip(rng.uniform(1.0, 2.0, len(members)), members))
    _, v = np.linalg.eigh(h)
    keys = np.stack(
        [
            group_eigenvalues(np.real(np.einsum("ij,jk,ki->i", v.conj().T, m.op, v)), m.grouping_tol)
            for m in members
        ],
        axis=1,
    )
    _, labels = np.unique(keys, axis=0, return_inverse=True)
    labels = labels.ravel()
    k = labels.max() + 1
    return SectorDecomposition(np.arange(k, dtype=float), np.bincount(labels, minlength=k), labels, v)


def _sectors_of(s) -> SectorDecomposition:
    if isinstance(s, SectorDecomposition):
        return s
    if isinstance(s, ChargeOperator):
        return s.sectors
    if isinstance(s, ChargeFamily):
        return s.joint_sectors
    return ChargeOperator(s).sectors


def nonselective_measure(rho, s):
    """``sum_N P_N rho P_N`` over the sectors of ``s``.

    ``s`` may be a :class:`SectorDecomposition`, a charge, or a family. Returns
    a :class:`DensityMatrix` for density input and a raw array otherwise.
    """
    sec = _sectors_of(s)
    out = sec.measure(qla.as_matrix(rho))
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out, rho.dims)
    return out


def twirl(rho, family: ChargeFamily):
    """Retraction onto the family's symmetric states.

    Applied as successive nonselective measurements of each member; the
    members commute, so the order does not matter.
    """
    if not isinstance(family, ChargeFamily):
        raise ConfigError("twirl needs a ChargeFamily")
    m = qla.as_matrix(rho)
    for member in family.members:
        m = member.sectors.measure(m)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(m, rho.dims)
    return m


def twirl_quadrature_oracle(rho, family: ChargeFamily, grid_points: int):
    """Uniform torus average of ``T(g) rho T(g)^dagger`` with ``T(g) = exp(i sum g_j n_j)``.

    Exact for integer charge spectra once ``grid_points`` exceeds every
    member's spectral diameter. Unitaries are built with ``scipy.linalg.expm``
    so this path shares no code with :func:`twirl`.
    """
    m = qla.as_matrix(rho)
    for member in family.members:
        w = np.linalg.eigvalsh(member.op)
        if np.max(np.abs(w - np.round(w))) > 1e-9:
            raise ValidationError(f"charge {member.label!r} has a non-integer spectrum")
    angles = 2 * np.pi * np.arange(grid_points) / grid_points
    steps = [[scipy.linalg.expm(1j * g * member.op) for g in angles] for member in family.members]
    acc = np.zeros_like(m)
    for combo in itertools.product(*steps):
        u = combo[0]
        for other in combo[1:]:
            u = u @ other
        acc += u @ m @ u.conj().T
    out = acc / grid_points ** len(family.members)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(out, rho.dims)
    return out


def is_symmetric(rho, n, tol: float = 1e-9) -> bool:
    op = n.op if isinstance(n, ChargeOperator) else n
    return qla.commutator_norm(qla.as_matrix(rho), op) <= tol


@dataclass(frozen=True)
class SectorSubspace:
    """Local supports of one global charge sector: ``h_A^n (x) h_B^n``."""

    charge: float
    pairs: tuple[tuple[int, int], ...]
    a_index: tuple[int, ...]
    b_index: tuple[int, ...]

    def basis_A(self, dA: int) -> np.ndarray:
        return np.eye(dA)[:, list(self.a_index)]

    def basis_B(self, dB: int) -> np.ndarray:
        return np.eye(dB)[:, list(self.b_index)]


def sector_subspaces(family: ChargeFamily, tol: float = 1e-9) -> list[SectorSubspace]:
    """Group computational product kets ``|i>|j>`` by global charge.

    Requires diagonal local charges; the global charge of ``|i>|j>`` is
    ``a_i + b_j`` (sum) or ``a_i * b_j`` (product).
    """
    if family.kind not in ("sum", "product") or family.local is None:
        raise ConfigError("sector_subspaces needs a sum or product charge family")
    nA, nB = family.local
    if not (nA.is_diagonal and nB.is_diagonal):
        raise ValidationError("sector_subspaces needs local charges diagonal in the computational basis")
    a, b = np.diag(nA.op).real, np.diag(nB.op).real
    q = (a[:, None] + b[None, :]) if family.kind == "sum" else (a[:, None] * b[None, :])
    flat = q.ravel()
    labels = group_eigenvalues(flat, tol)
    out = []
    for k in np.unique(labels):
        # order sectors by charge
        idx = np.flatnonzero(labels == k)
        pairs = tuple((int(i) // nB.dim, int(i) % nB.dim) for i in idx)
        out.append(
            SectorSubspace(
                float(flat[idx].mean()),
                pairs,
                tuple(sorted({p[0] for p in pairs})),
                tuple(sorted({p[1] for p in pairs})),
            )
        )
    out.sort(key=lambda s: s.charge)
    return out
