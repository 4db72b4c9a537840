"""Small complex linear algebra and seeded sampling helpers.

Matrices are plain ``numpy`` complex128 arrays. Random streams come from
``numpy.random.Generator`` backed by the PCG64 bit generator, which produces
the same stream for the same seed on every platform numpy supports.
"""

from __future__ import annotations

import numpy as np

#: Condition number above which a matrix is treated as singular.
COND_THRESHOLD = 1e12


class ShapeError(ValueError):
    """Raised when operand dimensions do not conform."""


class SingularMatrixError(ArithmeticError):
    """Raised when a matrix is singular or too ill-conditioned to invert."""

    def __init__(self, message, condition=np.inf):
        super().__init__(message)
        self.condition = condition


def make_rng(seed=None):
    """Return a PCG64-backed generator; an existing generator passes through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def as_complex_matrix(a):
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains NaN or Inf entries")
    return arr


def matmul(a, b):
    a = as_complex_matrix(a)
    b = as_complex_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def conj_transpose(a):
    return as_complex_matrix(a).conj().T


def condition_number(a):
    return float(np.linalg.cond(as_complex_matrix(a)))


def invert(a, cond_threshold=COND_THRESHOLD):
    """Invert a square matrix by Gauss-Jordan elimination with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If the matrix is singular or its 2-norm condition number exceeds
        ``cond_threshold``. The estimate is attached as ``.condition``.
    """
    a = as_complex_matrix(a)
    n, m = a.shape
    if n != m:
        raise ShapeError(f"cannot invert non-square matrix of shape {a.shape}")
    cond = condition_number(a)
    if not np.isfinite(cond) or cond > cond_threshold:
        raise SingularMatrixError(
            f"matrix is ill-conditioned (cond={cond:.3e})", condition=cond
        )

    aug = np.hstack([a.copy(), np.eye(n, dtype=np.complex128)])
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(aug[col:, col])))
        if aug[pivot, col] == 0:
            raise SingularMatrixError("zero pivot encountered", condition=np.inf)
        if pivot != col:
            aug[[col, pivot]] = aug[[pivot, col]]
        aug[col] /= aug[col, col]
        others = np.arange(n) != col
        aug[others] -= np.outer(aug[others, col], aug[col])
    return aug[:, n:]


def sample_cn(rng, variance=1.0, size=None):
    """Draw circularly-symmetric complex Gaussian samples CN(0, variance).

    Real and imaginary parts are independent N(0, variance / 2).
    """
    if variance < 0:
        raise ValueError(f"variance must be non-negative, got {variance}")
    rng = make_rng(rng)
    scale = np.sqrt(variance / 2.0)
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    out = scale * (re + 1j * im)
    if size is None:
        return complex(out)
    return out


def dbm_to_watts(dbm):
    out = 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def watts_to_dbm(watts):
    out = 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0
    return float(out) if out.ndim == 0 else out
