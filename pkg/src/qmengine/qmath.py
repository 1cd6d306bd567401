"""Dense complex linear algebra for small Hilbert spaces.

Every operator in the package is a plain ``numpy`` complex array. Tensor
structure is carried separately as a tuple of factor dimensions (a *layout*),
e.g. ``(2, 2, 2)`` for qubit A, qubit B and a qubit pointer.
"""

from __future__ import annotations

from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10


class DimensionError(ValueError):
    """Layout and matrix shapes disagree."""


class NotHermitianError(ValueError):
    pass


def as_cmat(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of shape {a.shape}")
    return a


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def check_layout(dims: Sequence[int], size: int | None = None) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise DimensionError("layout must contain at least one factor")
    if any(d < 2 for d in dims):
        raise DimensionError(f"every factor dimension must be >= 2, got {dims}")
    if size is not None and int(np.prod(dims)) != size:
        raise DimensionError(
            f"layout {dims} has total dimension {int(np.prod(dims))}, matrix has {size}"
        )
    return dims


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, ``(A⊗B)[i*rB+k, j*cB+l] = A[i,j] B[k,l]``."""
    return np.kron(as_cmat(a), as_cmat(b))


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    return reduce(kron, mats)


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor of ``rho`` not listed in ``keep``.

    Kept factors stay in their original order. Raises ``DimensionError`` when
    the layout does not match the matrix.
    """
    rho = as_cmat(rho)
    if rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"partial trace needs a square matrix, got {rho.shape}")
    dims = check_layout(dims, rho.shape[0])
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise DimensionError("keep must name at least one factor")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise DimensionError(f"keep indices {keep} out of range for layout {dims}")

    n = len(dims)
    t = rho.reshape(dims + dims)
    # einsum labels: row index r_i, column index c_i; traced factors share a label
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = [i for i in keep] + [i + n for i in keep]
    red = np.einsum(t, row + col, out)
    d = int(np.prod([dims[i] for i in keep]))
    return red.reshape(d, d)


def factor_permutation(dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Unitary that reorders tensor factors.

    The returned ``P`` maps ``|x_0 x_1 ...⟩`` (layout ``dims``) to the product
    state whose ``k``-th factor is ``x_{perm[k]}``, so ``P ρ P†`` has layout
    ``[dims[p] for p in perm]``. Swapping two equal-dimension factors gives the
    usual SWAP gate.
    """
    dims = check_layout(dims)
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(len(dims))):
        raise DimensionError(f"{perm} is not a permutation of {len(dims)} factors")
    d = int(np.prod(dims))
    src = np.arange(d).reshape(dims)
    dst = np.transpose(src, perm).ravel()
    p = np.zeros((d, d), dtype=complex)
    p[np.arange(d), dst] = 1.0
    return p


def is_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    h = as_cmat(h)
    return h.shape[0] == h.shape[1] and bool(np.max(np.abs(h - dag(h)), initial=0.0) <= tol)


def herm_eigen(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns ascending eigenvalues and a unitary ``V`` with ``h = V diag(w) V†``.
    Each eigenvector is rephased so that its largest-magnitude component
    (first one on ties) is real and positive, which makes the output
    reproducible across runs.
    """
    h = as_cmat(h)
    if not is_hermitian(h):
        raise NotHermitianError("herm_eigen requires a Hermitian matrix")
    w, v = np.linalg.eigh(0.5 * (h + dag(h)))
    mags = np.abs(v)
    # first index attaining the column maximum, robust to float noise
    idx = np.argmax(mags >= mags.max(axis=0) - 1e-12, axis=0)
    lead = v[idx, np.arange(v.shape[1])]
    v = v * (np.abs(lead) / lead)[None, :]
    return w, v


def unitary_from_generator(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h``."""
    w, v = herm_eigen(h)
    return (v * np.exp(-1j * w * t)[None, :]) @ dag(v)


def evolve_unitary(rho: np.ndarray, h: np.ndarray, t: float) -> np.ndarray:
    """Conjugate ``rho`` by ``exp(-i h t)``."""
    u = unitary_from_generator(h, t)
    return u @ as_cmat(rho) @ dag(u)


def expect(op: np.ndarray, rho: np.ndarray) -> float:
    """Real part of ``Tr[op rho]``; the energies used here are Hermitian."""
    return float(np.real(np.einsum("ij,ji->", op, rho)))
