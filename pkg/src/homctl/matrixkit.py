"""Dense real matrix primitives used throughout the package.

Matrices are plain ``numpy.ndarray`` objects (row-major, float64).  This
module adds the handful of operations the control code relies on:

    expm            : matrix exponential, exact on nilpotent input
    discretize_pair : zero-order-hold discretization of (A, B)
    sym_eig         : eigendecomposition of a symmetric matrix
    sqrtm_pd        : principal square root of a positive definite matrix
    is_pd           : positive definiteness with an explicit margin
    weighted_opnorm : operator norm induced by a weighted Euclidean norm
    mat_to_json / mat_from_json : array-of-rows JSON representation

All functions are pure and never mutate their arguments, so they are safe
to call concurrently.
"""

import numpy as np
import scipy.linalg

from .errors import DimensionError, NotPositiveDefiniteError

__all__ = [
    "as_matrix", "as_symmetric", "expm", "discretize_pair", "sym_eig",
    "sqrtm_pd", "is_pd", "weighted_opnorm", "mat_to_json", "mat_from_json",
]

#: Relative symmetry tolerance accepted by :func:`as_symmetric`.
SYMMETRY_RTOL = 1e-12


def as_matrix(M, name="matrix"):
    """Coerce ``M`` to a float 2-D array with finite entries."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if A.size == 0:
        raise DimensionError(f"{name} must have positive dimensions")
    if not np.all(np.isfinite(A)):
        raise DimensionError(f"{name} contains non-finite entries")
    return A


def as_symmetric(S, name="matrix"):
    """Coerce to a square matrix and check symmetry.

    The symmetry residual ``max|S - S^T|`` must not exceed
    ``SYMMETRY_RTOL * max|S|``; the returned matrix is exactly
    symmetrized so downstream code can rely on bitwise symmetry.
    """
    A = as_matrix(S, name)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    resid = np.max(np.abs(A - A.T))
    if resid > SYMMETRY_RTOL * max(scale, 1e-300):
        raise DimensionError(
            f"{name} is not symmetric: residual {resid:.3e} "
            f"exceeds {SYMMETRY_RTOL:.0e} * max|entry| = {SYMMETRY_RTOL * scale:.3e}")
    return 0.5 * (A + A.T)


def _nilpotency_index(M, rtol=1e-14):
    """Return the nilpotency index of ``M`` (smallest k with M^k ~ 0),
    or None if M is not nilpotent.

    Uses the plain power test M^n = 0; scales are compared against the
    accumulated power magnitude so strictly triangular matrices with
    rounding noise still register as nilpotent.
    """
    n = M.shape[0]
    scale = np.max(np.abs(M))
    if scale == 0.0:
        return 1
    power = M.copy()
    for k in range(1, n + 1):
        if np.max(np.abs(power)) <= rtol * scale ** k:
            return k
        power = power @ M
    if np.max(np.abs(power)) <= rtol * scale ** (n + 1):
        return n + 1
    return None


def expm(M):
    """Matrix exponential e^M.

    Nilpotent input is detected with the power test M^n = 0 and handled by
    the exactly terminating power series, which keeps dead-beat arithmetic
    bit-stable.  Everything else goes through the scaling-and-squaring
    Pade implementation of :func:`scipy.linalg.expm`.
    """
    A = as_matrix(M, "expm argument")
    n, m = A.shape
    if n != m:
        raise DimensionError(f"expm requires a square matrix, got {A.shape}")
    if np.all(A == np.diag(np.diag(A))):
        return np.diag(np.exp(np.diag(A)))
    k = _nilpotency_index(A)
    if k is not None:
        out = np.eye(n)
        term = np.eye(n)
        for i in range(1, k):
            term = term @ A / i
            out = out + term
        return out
    return scipy.linalg.expm(A)


def discretize_pair(A, B, h):
    """Zero-order-hold discretization of dx/dt = A x + B u.

    Returns ``(A_h, B_h)`` with ``A_h = e^{hA}`` and
    ``B_h = int_0^h e^{sA} B ds``, both obtained from a single exponential
    of the augmented block matrix ``[[A, B], [0, 0]] * h`` so the integral
    is computed to machine precision on one code path.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    n = A.shape[0]
    if A.shape[1] != n:
        raise DimensionError(f"A must be square, got {A.shape}")
    if B.shape[0] != n:
        raise DimensionError(f"B has {B.shape[0]} rows, expected {n}")
    if h < 0:
        raise DimensionError(f"step must be nonnegative, got {h}")
    m = B.shape[1]
    blk = np.zeros((n + m, n + m))
    blk[:n, :n] = A
    blk[:n, n:] = B
    E = expm(blk * h)
    return E[:n, :n].copy(), E[:n, n:].copy()


def sym_eig(S):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(w, V)`` with eigenvalues ``w`` ascending and orthonormal
    eigenvectors in the columns of ``V`` (so ``S = V diag(w) V^T``).
    """
    A = as_symmetric(S, "sym_eig argument")
    w, V = np.linalg.eigh(A)
    return w, V


def sqrtm_pd(S):
    """Symmetric square root of a positive definite matrix.

    Raises :class:`NotPositiveDefiniteError` (carrying the offending
    minimal eigenvalue) when the input is not PD.
    """
    A = as_symmetric(S, "sqrtm_pd argument")
    w, V = np.linalg.eigh(A)
    if w[0] <= 0.0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite: min eigenvalue {w[0]:.6e}",
            min_eigenvalue=float(w[0]))
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def is_pd(S, margin=None):
    """True iff the minimal eigenvalue of symmetric ``S`` exceeds ``margin``.

    ``margin`` defaults to ``1e-9 * ||S||_2``, a numerical cushion for
    strict matrix inequalities.
    """
    A = as_symmetric(S, "is_pd argument")
    w = np.linalg.eigvalsh(A)
    if margin is None:
        margin = 1e-9 * max(abs(w[0]), abs(w[-1]))
    return bool(w[0] > margin)


def weighted_opnorm(M, P):
    """Operator norm sup ||M x||_P / ||x||_P with ||x||_P = sqrt(x^T P x).

    Computed as the square root of the top eigenvalue of the
    P^{1/2}-conjugated Gram matrix.
    """
    M = as_matrix(M, "M")
    R = sqrtm_pd(P)
    Rinv = np.linalg.inv(R)
    C = R @ M @ Rinv
    w = np.linalg.eigvalsh(C.T @ C)
    return float(np.sqrt(max(w[-1], 0.0)))


def mat_to_json(M):
    """Array-of-rows representation used in the CLI JSON documents."""
    A = np.atleast_2d(np.asarray(M, dtype=float))
    return [[float(v) for v in row] for row in A]


def mat_from_json(rows, name="matrix"):
    """Inverse of :func:`mat_to_json` with validation."""
    try:
        A = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DimensionError(f"{name}: not a rectangular numeric array-of-rows") from exc
    return as_matrix(A, name)
