"""Dense complex Hermitian linear algebra used by the semidefinite optimizer.

Three small operations: eigendecomposition with eigenvalues sorted in
descending order, projection onto the positive semidefinite cone, and the
real trace inner product tr(AB).  All inputs are validated for Hermitian
symmetry so that silent misuse (e.g. passing an un-symmetrized product)
fails loudly instead of corrupting the optimizer state.
"""

from __future__ import annotations

import numpy as np

__all__ = ["hermitian_eig", "psd_project", "trace_product"]


def _as_square_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _check_hermitian(a: np.ndarray, name: str) -> None:
    # symmetry tolerance scales with the matrix magnitude
    scale = max(1.0, float(np.linalg.norm(a)))
    if np.max(np.abs(a - a.conj().T)) > 1e-12 * scale:
        raise ValueError(f"{name} is not Hermitian within tolerance")


def hermitian_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(eigenvalues, eigenvectors)`` where ``eigenvalues`` is a real
    1-D array sorted from largest to smallest and ``eigenvectors[:, i]`` is
    the orthonormal eigenvector paired with ``eigenvalues[i]``.

    Raises ValueError if the input is not Hermitian within ``1e-12`` times
    its Frobenius norm.
    """
    a = _as_square_matrix(a, "a")
    _check_hermitian(a, "a")
    w, v = np.linalg.eigh(a)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def psd_project(a) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix to a Hermitian input.

    Negative eigenvalues are clipped to zero and the matrix is rebuilt from
    the remaining spectrum.  Idempotent: projecting a PSD matrix returns it
    unchanged up to round-off.
    """
    a = _as_square_matrix(a, "a")
    _check_hermitian(a, "a")
    w, v = np.linalg.eigh(a)
    w = np.maximum(w, 0.0)
    out = (v * w) @ v.conj().T
    # rebuild can leave ~1e-17 asymmetry; re-symmetrize so results chain
    return 0.5 * (out + out.conj().T)


def trace_product(a, b) -> float:
    """Real trace inner product ``Re tr(AB)`` of two Hermitian matrices.

    For Hermitian operands the product trace is exactly real; an imaginary
    residue above ``1e-10`` (scaled by the operand norms) indicates a
    non-Hermitian argument and raises ValueError, as does a dimension
    mismatch.
    """
    a = _as_square_matrix(a, "a")
    b = _as_square_matrix(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    t = complex(np.einsum("ij,ji->", a, b))
    scale = max(1.0, float(np.linalg.norm(a)) * float(np.linalg.norm(b)))
    if abs(t.imag) > 1e-10 * scale:
        raise ValueError(
            f"trace product has imaginary residue {t.imag:.3e}; "
            "operands are not both Hermitian"
        )
    return float(t.real)
