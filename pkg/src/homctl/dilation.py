"""Linear dilation group and the canonical homogeneous norm.

A dilation is the one-parameter matrix group d(s) = e^{s G} generated by an
anti-Hurwitz matrix G.  Together with a weighted Euclidean norm
||x|| = sqrt(x^T P x) satisfying the monotonicity condition
P G + G^T P > 0 it induces the canonical homogeneous norm: ||x||_d = e^{s_x}
where s_x is the unique solution of ||d(-s) x|| = 1.  The homogeneous norm
is the Lyapunov function of every controller this package designs, so the
solver below is deliberately conservative: rigorous bracketing from the
norm-equivalence bounds plus plain bisection.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import matrixkit as mk
from .errors import (DimensionError, HomctlError, NonMonotoneDilationError,
                     NotPositiveDefiniteError)

__all__ = ["DilationSpec", "NormBounds", "dilation_at", "hom_norm",
           "hom_norm_gradient", "norm_bounds", "check_monotone"]

#: States with weighted norm below this are treated as exactly zero to
#: avoid log underflow in the implicit-norm solver.
ZERO_NORM_FLOOR = 1e-300

_BISECT_RTOL = 1e-12
_BISECT_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class DilationSpec:
    """Generator, homogeneity degree and norm weight of a dilation.

    Attributes
    ----------
    G_d : ndarray
        Generator of the dilation group; must be anti-Hurwitz.
    mu : float
        Homogeneity degree carried along for the control laws built on
        top of this dilation (negative: finite-time, positive: nearly
        fixed-time).
    P : ndarray
        Symmetric positive definite weight of the underlying norm.
    """

    G_d: np.ndarray
    mu: float
    P: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "G_d", mk.as_matrix(self.G_d, "G_d"))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "P", mk.as_symmetric(self.P, "P"))
        n = self.G_d.shape[0]
        if self.G_d.shape != (n, n) or self.P.shape != (n, n):
            raise DimensionError("G_d and P must be square of equal size")
        if self.validate:
            w = np.linalg.eigvals(self.G_d)
            if np.min(w.real) <= 0.0:
                raise NonMonotoneDilationError(
                    f"G_d is not anti-Hurwitz: min Re(eig) = {np.min(w.real):.3e}")
            if not mk.is_pd(self.P, 0.0):
                raise NotPositiveDefiniteError("P is not positive definite")
            ok, lam = check_monotone(self)
            if not ok:
                raise NonMonotoneDilationError(
                    f"dilation is not monotone: lambda_min(P G_d + G_d^T P) = {lam:.3e}")

    @property
    def dim(self):
        return self.G_d.shape[0]

    @cached_property
    def _diag_generator(self):
        """Diagonal of G_d when it is exactly diagonal, else None.

        Integrator-chain designs produce diagonal generators, for which
        e^{s G_d} reduces to a vector of scalar exponentials; this fast
        path dominates the simulation profile.
        """
        off = self.G_d - np.diag(np.diag(self.G_d))
        if np.all(off == 0.0):
            return np.diag(self.G_d).copy()
        return None

    @cached_property
    def bounds(self):
        return norm_bounds(self)

    def weighted_norm(self, x):
        """||x|| = sqrt(x^T P x), scaled so extreme magnitudes do not
        overflow or denormalize the quadratic form."""
        x = np.asarray(x, dtype=float).reshape(-1)
        scale = float(np.max(np.abs(x)))
        if scale == 0.0 or not np.isfinite(scale):
            return scale
        z = x / scale
        return scale * float(np.sqrt(max(z @ self.P @ z, 0.0)))


@dataclass(frozen=True)
class NormBounds:
    """Power-law envelopes sandwiching the homogeneous norm.

    sigma_lower(||x||) <= ||x||_d <= sigma_upper(||x||) for all x, where
    both envelopes are the piecewise power functions built from the
    extreme eigenvalues ``alpha >= beta > 0`` of the symmetrized,
    P^{1/2}-conjugated generator.
    """

    alpha: float
    beta: float

    def sigma_lower(self, r):
        r = float(r)
        if r < 0:
            raise ValueError("argument must be nonnegative")
        if r == 0.0:
            return 0.0
        return r ** (1.0 / self.alpha) if r >= 1.0 else r ** (1.0 / self.beta)

    def sigma_upper(self, r):
        r = float(r)
        if r < 0:
            raise ValueError("argument must be nonnegative")
        if r == 0.0:
            return 0.0
        return r ** (1.0 / self.beta) if r >= 1.0 else r ** (1.0 / self.alpha)


def dilation_at(spec, s):
    """Group element d(s) = e^{s G_d}."""
    s = float(s)
    if not np.isfinite(s):
        raise ValueError(f"dilation parameter must be finite, got {s}")
    diag = spec._diag_generator
    if diag is not None:
        return np.diag(np.exp(s * diag))
    return mk.expm(s * spec.G_d)


def check_monotone(spec):
    """Monotonicity certificate of the dilation.

    Returns ``(ok, lam)`` where ``lam`` is the minimal eigenvalue of
    P G_d + G_d^T P and ``ok`` is True iff it is strictly positive.
    """
    S = spec.P @ spec.G_d
    S = S + S.T
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    return bool(w[0] > 0.0), float(w[0])


def norm_bounds(spec):
    """Norm-equivalence envelope of the homogeneous norm (see NormBounds)."""
    R = mk.sqrtm_pd(spec.P)
    Rinv = np.linalg.inv(R)
    C = R @ spec.G_d @ Rinv
    w = np.linalg.eigvalsh(C + C.T)
    alpha, beta = 0.5 * float(w[-1]), 0.5 * float(w[0])
    if beta <= 0.0:
        raise NonMonotoneDilationError(
            f"dilation is not monotone: beta = {beta:.3e} <= 0")
    return NormBounds(alpha=alpha, beta=beta)


def _level_value(spec, x, s):
    """||d(-s) x||_P, mapped to +inf when the evaluation overflows."""
    with np.errstate(over="ignore", invalid="ignore"):
        v = dilation_at(spec, -s) @ x
        val = v @ spec.P @ v
    if not np.isfinite(val):
        return np.inf
    return np.sqrt(max(val, 0.0))


def hom_norm(spec, x):
    """Canonical homogeneous norm ||x||_d.

    Solves ||d(-s) x|| = 1 by bisection on s.  The map s -> ||d(-s) x||
    is strictly decreasing for a monotone dilation, and the bracket is
    seeded from the rigorous envelope ``norm_bounds`` (expanded
    multiplicatively should rounding put the root outside of it).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != spec.dim:
        raise DimensionError(f"state has dim {x.shape[0]}, expected {spec.dim}")
    r = spec.weighted_norm(x)
    if r < ZERO_NORM_FLOOR:
        return 0.0

    # Bracket in log form (log sigma(r) = log(r)/alpha or /beta) so extreme
    # magnitudes cannot underflow the power laws.
    nb = spec.bounds
    log_r = np.log(r)
    lo, hi = sorted((log_r / nb.alpha, log_r / nb.beta))

    # Rounding guard: the root must satisfy f(lo) >= 1 >= f(hi) for the
    # decreasing level map f(s) = ||d(-s) x||.
    step = max(hi - lo, 1.0)
    for _ in range(128):
        if _level_value(spec, x, lo) >= 1.0:
            break
        lo -= step
        step *= 2.0
    else:
        raise NonMonotoneDilationError("could not bracket the homogeneous norm "
                                       "(level map not decreasing?)")
    step = max(hi - lo, 1.0)
    for _ in range(128):
        if _level_value(spec, x, hi) <= 1.0:
            break
        hi += step
        step *= 2.0
    else:
        raise NonMonotoneDilationError("could not bracket the homogeneous norm "
                                       "(level map not decreasing?)")

    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if hi - lo < _BISECT_RTOL * max(1.0, abs(mid)):
            return float(np.exp(mid))
        if _level_value(spec, x, mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    raise HomctlError("homogeneous-norm bisection failed to converge in "
                      f"{_BISECT_MAX_ITER} iterations (broken invariant)")


def hom_norm_gradient(spec, x):
    """Row gradient of the homogeneous norm at x != 0.

    Evaluates the closed-form expression
    ``||x||_d * x^T D^T P D / (x^T D^T P G_d D x)`` with
    ``D = d(-ln ||x||_d)``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    nrm = hom_norm(spec, x)
    if nrm == 0.0:
        raise HomctlError("homogeneous norm is not differentiable at the origin")
    D = dilation_at(spec, -np.log(nrm))
    z = D @ x
    num = nrm * (z @ spec.P @ D)
    den = z @ spec.P @ spec.G_d @ z
    return num / den
