"""Dense complex linear algebra kernel.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Functions that
take quantum states also accept any object exposing the matrix as ``.mat``
(e.g. :class:`symsep.states.DensityMatrix`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, ValidationError

#: Default validation tolerance (relative, Frobenius) used across the package.
TOL = 1e-9


def as_matrix(x) -> np.ndarray:
    """Return the underlying complex matrix of ``x``."""
    m = getattr(x, "mat", x)
    return np.asarray(m, dtype=complex)


def _require_square(m: np.ndarray, name: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(mats: Sequence) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, as_matrix(m))
    return out


def partial_trace(m, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``keep`` is an index or an iterable of subsystem indices; the kept
    subsystems appear in increasing index order in the result.
    """
    m = as_matrix(m)
    _require_square(m)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != m.shape[0]:
        raise DimensionError(f"dims {dims} do not match matrix dimension {m.shape[0]}")
    keep = sorted({int(keep)} if np.isscalar(keep) else {int(k) for k in keep})
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep={keep} out of range for {n} subsystems")

    t = m.reshape(dims + dims)
    # einsum labels: row index i_k, column index j_k; traced subsystems share a label
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    rows = [next(letters) for _ in range(n)]
    cols = [rows[k] if k not in keep else next(letters) for k in range(n)]
    out = "".join(rows[k] for k in keep) + "".join(cols[k] for k in keep)
    res = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return res.reshape(dk, dk)


def partial_transpose(m, dims: Sequence[int], sys: int = 1) -> np.ndarray:
    """Transpose subsystem ``sys`` of a multipartite operator."""
    m = as_matrix(m)
    _require_square(m)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != m.shape[0]:
        raise DimensionError(f"dims {dims} do not match matrix dimension {m.shape[0]}")
    n = len(dims)
    t = m.reshape(dims + dims)
    axes = list(range(2 * n))
    axes[sys], axes[n + sys] = axes[n + sys], axes[sys]
    return t.transpose(axes).reshape(m.shape)


def hermiticity_error(m) -> float:
    """Relative Frobenius norm of the anti-Hermitian part."""
    m = as_matrix(m)
    scale = max(1.0, float(np.linalg.norm(m)))
    return float(np.linalg.norm(m - m.conj().T)) / scale


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray  # real, ascending
    eigenvectors: np.ndarray  # unitary, columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def hermitian_eig(m, tol: float = TOL) -> EigenDecomposition:
    m = as_matrix(m)
    _require_square(m)
    if hermiticity_error(m) > tol:
        raise ValidationError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return EigenDecomposition(w, v)


def psd_sqrt(m, tol: float = TOL) -> np.ndarray:
    """Square root of a positive semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are clipped to zero; anything more negative
    is rejected.
    """
    eig = hermitian_eig(m, tol)
    w = eig.eigenvalues
    if w.size and w[0] < -tol:
        raise ValidationError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    v = eig.eigenvectors
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def _pair(rho, sigma) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_matrix(rho), as_matrix(sigma)
    _require_square(a, "rho")
    _require_square(b, "sigma")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    for name, x in (("rho", a), ("sigma", b)):
        if abs(np.trace(x).real - 1.0) > TOL:
            raise ValidationError(f"{name} does not have unit trace")
    return a, b


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    a, b = _pair(rho, sigma)
    sa = psd_sqrt(a)
    psd_sqrt(b)  # validates sigma
    inner = sa @ b @ sa
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    f = float(np.sum(np.sqrt(np.clip(w, 0.0, None)))) ** 2
    return min(max(f, 0.0), 1.0)


def bures_distance(rho, sigma) -> float:
    f = fidelity(rho, sigma)
    return float(np.sqrt(max(0.0, 2.0 * (1.0 - np.sqrt(f)))))


def commutator_norm(a, b) -> float:
    a, b = as_matrix(a), as_matrix(b)
    _require_square(a)
    _require_square(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a @ b - b @ a))


# --- serialization -----------------------------------------------------------


def _floats(x: np.ndarray) -> list:
    # repr of a Python float round-trips exactly (>= 17 significant digits as needed)
    return [[float(v) for v in row] for row in x]


def matrix_to_dict(m) -> dict:
    m = as_matrix(m)
    if m.ndim != 2:
        raise DimensionError("only 2-D matrices can be serialized")
    return {"rows": m.shape[0], "cols": m.shape[1], "re": _floats(m.real), "im": _floats(m.imag)}


def matrix_from_dict(obj: dict) -> np.ndarray:
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    except KeyError as exc:
        raise ValidationError(f"matrix JSON missing key {exc.args[0]!r}") from None
    if re.shape != (rows, cols) or im.shape != (rows, cols):
        raise DimensionError(f"matrix JSON entries do not match declared shape {rows}x{cols}")
    return re + 1j * im


def matrix_to_json(m) -> str:
    return json.dumps(matrix_to_dict(m))


def matrix_from_json(text: str) -> np.ndarray:
    return matrix_from_dict(json.loads(text))
