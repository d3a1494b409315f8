"""Homogeneous state-feedback synthesis for controllable linear plants.

The design pipeline, for a plant dx/dt = A x + B u:

1.  Solve the linear matrix equation
        A G0 - G0 A + B Y0 = A,    G0 B = 0
    (least-norm vectorized solve).  For a nilpotent single-input plant the
    solution is unique with Y0 = 0.
2.  Form the dilation generator G_d = I + mu * G0, anti-Hurwitz for every
    admissible degree mu in [-1, 1/n_tilde] \\ {0}.
3.  Solve the gain equation
        A0 X + X A0^T + B Y + Y^T B^T + rho (G_d X + X G_d^T) = 0,
        X = X^T > 0,   G_d X + X G_d^T > 0
    by alternating projections between the affine solution set and a
    product of shifted positive semidefinite cones.
4.  Assemble the feedback
        u(x) = K0 x + ||x||_d^{1+mu} K d(-ln ||x||_d) x,
        K0 = Y0 (G0 - I)^{-1},   K = Y X^{-1},
    whose closed loop satisfies d/dt ||x||_d = -rho ||x||_d^{1+mu}.

The resulting ``ControllerDesign`` bundles the plant, the certificates and
the dilation; ``validate_design`` re-checks every invariant and is run on
every construction path.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import matrixkit as mk
from .dilation import DilationSpec, dilation_at, hom_norm, hom_norm_gradient
from .errors import (ControllabilityError, DimensionError, LmiInfeasibleError,
                     NotPositiveDefiniteError, SynthesisError)

__all__ = [
    "ControllerDesign", "controllability_index", "solve_G0_Y0", "make_Gd",
    "solve_gain_lmi", "build_controller", "design_from_solution",
    "eval_control", "lyapunov_decay_residual", "design_residuals",
    "validate_design",
]

# Residual tolerances enforced on every constructed design.
TOL_EQ8 = 1e-9
TOL_EQ9 = 1e-9
TOL_EQ10_REL = 1e-8
TOL_SKEW = 1e-8

_CONTROLLABILITY_RTOL = 1e-8


def _vec(M):
    return np.asarray(M, dtype=float).reshape(-1, order="F")


def controllability_index(A, B, rtol=_CONTROLLABILITY_RTOL):
    """Smallest k with rank [B, AB, ..., A^{k-1}B] = n.

    Rank is counted from singular values above ``rtol * sigma_max``.
    Raises :class:`ControllabilityError` (naming the rank defect) when the
    full Kalman matrix is rank deficient.
    """
    A = mk.as_matrix(A, "A")
    B = mk.as_matrix(B, "B")
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    for k in range(1, n + 1):
        K = np.hstack(blocks[:k])
        sv = np.linalg.svd(K, compute_uv=False)
        rank = int(np.sum(sv > rtol * sv[0])) if sv[0] > 0 else 0
        if rank == n:
            return k
    raise ControllabilityError(
        f"pair {{A, B}} is not controllable: Kalman matrix rank {rank} < {n} "
        f"(defect {n - rank})")


def solve_G0_Y0(A, B):
    """Solve A G0 - G0 A + B Y0 = A with G0 B = 0.

    The joint system is solved in vectorized form with a least-norm
    least-squares solve.  For a controllable pair a solution exists; for a
    nilpotent single-input plant it is unique (asserted) with Y0 = 0 and
    G0 similar to -diag(n-1, ..., 1, 0).
    """
    A = mk.as_matrix(A, "A")
    B = mk.as_matrix(B, "B")
    n = A.shape[0]
    m = B.shape[1]
    controllability_index(A, B)

    I_n = np.eye(n)
    # Rows: vec(A G0 - G0 A + B Y0) = vec(A)  and  vec(G0 B) = 0.
    top = np.hstack([np.kron(I_n, A) - np.kron(A.T, I_n), np.kron(I_n, B)])
    bot = np.hstack([np.kron(B.T, I_n), np.zeros((n * m, m * n))])
    M = np.vstack([top, bot])
    rhs = np.concatenate([_vec(A), np.zeros(n * m)])

    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    resid = np.linalg.norm(M @ sol - rhs)
    scale = max(1.0, float(np.linalg.norm(A)))
    if resid > TOL_EQ8 * scale:
        raise SynthesisError(
            f"G0/Y0 equation is inconsistent: residual {resid:.3e}")

    G0 = sol[:n * n].reshape((n, n), order="F")
    Y0 = sol[n * n:].reshape((m, n), order="F")

    nilpotent = _is_nilpotent(A)
    if nilpotent and m == 1:
        rank = np.linalg.matrix_rank(M)
        if rank < n * n + m * n:
            raise SynthesisError(
                "G0/Y0 solution expected unique for a nilpotent single-input "
                f"plant, but the system is rank deficient ({rank})")
        Y0 = np.zeros_like(Y0)
    return G0, Y0


def _is_nilpotent(A, rtol=1e-12):
    n = A.shape[0]
    scale = np.max(np.abs(A))
    if scale == 0.0:
        return True
    power = np.linalg.matrix_power(A, n)
    return np.max(np.abs(power)) <= rtol * scale ** n


def make_Gd(G0, mu, n_tilde):
    """Dilation generator G_d = I + mu * G0 for an admissible degree.

    ``mu`` must lie in [-1, 1/n_tilde] and differ from zero (the zero
    degree is the plain linear feedback, outside the scope of this
    package).  Anti-Hurwitzness of the result is verified.
    """
    G0 = mk.as_matrix(G0, "G0")
    mu = float(mu)
    n_tilde = int(n_tilde)
    if mu == 0.0:
        raise SynthesisError("degree mu = 0 is rejected (linear feedback case)")
    if not (-1.0 <= mu <= 1.0 / n_tilde):
        raise SynthesisError(
            f"degree mu = {mu} outside the admissible range [-1, 1/{n_tilde}]")
    Gd = np.eye(G0.shape[0]) + mu * G0
    w = np.linalg.eigvals(Gd)
    if np.min(w.real) <= 0.0:
        raise SynthesisError(
            f"G_d = I + mu G0 is not anti-Hurwitz: min Re(eig) = {np.min(w.real):.3e}")
    return Gd


# ---------------------------------------------------------------------------
# Gain equation solver (alternating projections with Dykstra correction)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _sym_indices(n):
    return [(i, j) for j in range(n) for i in range(j + 1)]


def _svec(M):
    """Isometric vectorization of a symmetric matrix (off-diagonals * sqrt2)."""
    n = M.shape[0]
    out = np.empty(n * (n + 1) // 2)
    for k, (i, j) in enumerate(_sym_indices(n)):
        out[k] = M[i, j] if i == j else np.sqrt(2.0) * M[i, j]
    return out


def _unsvec(v, n):
    M = np.zeros((n, n))
    for k, (i, j) in enumerate(_sym_indices(n)):
        if i == j:
            M[i, i] = v[k]
        else:
            M[i, j] = M[j, i] = v[k] / np.sqrt(2.0)
    return M


def _clip_psd(v, n, floor):
    """Project a symmetric block (svec coords) onto {S : S >= floor * I}."""
    S = _unsvec(v, n)
    w, V = np.linalg.eigh(S)
    if w[0] >= floor:
        return v, float(w[0])
    S = (V * np.maximum(w, floor)) @ V.T
    return _svec(0.5 * (S + S.T)), float(w[0])


def _gramian_start(A0, B, Gd, rho):
    """Exact solution of the gain equality with Y = -B^T.

    Substituting Y = -c B^T turns the equality into a Lyapunov equation for
    the anti-Hurwitz matrix A0 + rho G_d, whose solution is a positive
    definite controllability Gramian.  The pair satisfies the equality to
    machine precision and, in practice, both definiteness constraints as
    well, so the projection iteration below usually accepts it outright.
    """
    a_hurwitz = -(A0 + rho * Gd)
    X = scipy.linalg.solve_continuous_lyapunov(a_hurwitz, -2.0 * (B @ B.T))
    X = 0.5 * (X + X.T)
    Y = -B.T.copy()
    resid = np.linalg.norm(
        A0 @ X + X @ A0.T + B @ Y + Y.T @ B.T + rho * (Gd @ X + X @ Gd.T))
    if not np.all(np.isfinite(X)) or resid > 1e-10 * max(
            1.0, np.linalg.norm(X, 2)):
        return None
    return X, Y


def solve_gain_lmi(A0, B, Gd, rho, eps=None, max_iter=50_000,
                   return_info=False, init=None):
    """Feasible point of the gain equation.

    Lifts W = G_d X + X G_d^T into an extra symmetric variable so that the
    constraint set is the intersection of one affine subspace (the gain
    equality plus the W coupling) with a product of shifted PSD cones
    {X >= eps I} x {W >= eps I}.  Dykstra-corrected alternating
    projections run until the affine-projected iterate clears both cone
    margins; trace(X) = n is re-imposed after every cycle to remove the
    scale degeneracy of the homogeneous equality.  The iteration is
    warm-started at the Gramian solution of the equality (``init=None``);
    pass ``init='identity'`` to force the generic start.

    ``eps`` is the requested strictness margin under the trace
    normalization (default 1e-6).  Aggressive deep-chain designs can have
    feasible sets whose best margin is far smaller; the effective margin
    is then relaxed (down to a 1e-13 floor) rather than failing, and is
    reported in the info dictionary.

    The returned pair is rescaled so that lambda_min(X) = 1, which pins
    the otherwise free norm scale of the design (see ``build_controller``).
    """
    A0 = mk.as_matrix(A0, "A0")
    B = mk.as_matrix(B, "B")
    Gd = mk.as_matrix(Gd, "Gd")
    rho = float(rho)
    if rho <= 0.0:
        raise SynthesisError(f"rho must be positive, got {rho}")
    n = A0.shape[0]
    m = B.shape[1]
    q = n * (n + 1) // 2
    dim = 2 * q + m * n
    eps_req = 1e-6 if eps is None else float(eps)
    EPS_FLOOR = 1e-13

    # Affine constraints C z = 0 over z = [svec X, vec Y, svec W].
    C = np.zeros((2 * q, dim))
    for k, (i, j) in enumerate(_sym_indices(n)):
        E = np.zeros((n, n))
        if i == j:
            E[i, i] = 1.0
        else:
            E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
        C[:q, k] = _svec(A0 @ E + E @ A0.T)
        C[q:, k] = _svec(Gd @ E + E @ Gd.T)
        C[:q, q + m * n + k] = rho * _svec(E)
        C[q:, q + m * n + k] = -_svec(E)
    for k in range(m * n):
        y = np.zeros(m * n)
        y[k] = 1.0
        Ydir = y.reshape((m, n), order="F")
        S = B @ Ydir
        C[:q, q + k] = _svec(S + S.T)
    proj_affine = np.eye(dim) - np.linalg.pinv(C) @ C

    def split(z):
        return z[:q], z[q:q + m * n], z[q + m * n:]

    start = None if init == "identity" else _gramian_start(A0, B, Gd, rho)
    z = np.zeros(dim)
    if start is not None:
        X0, Y0g = start
        s = n / np.trace(X0)
        z[:q] = _svec(s * X0)
        z[q:q + m * n] = (s * Y0g).reshape(-1, order="F")
        z[q + m * n:] = _svec(s * (Gd @ X0 + X0 @ Gd.T))
    else:
        z[:q] = _svec(np.eye(n))
        z[q + m * n:] = _svec(Gd + Gd.T)
    cone_inc = np.zeros(dim)

    eps_eff = eps_req
    if start is not None:
        m0 = min(np.linalg.eigvalsh(_unsvec(z[:q], n))[0],
                 np.linalg.eigvalsh(_unsvec(z[q + m * n:], n))[0])
        if m0 > 0.0:
            eps_eff = max(min(eps_req, 0.5 * m0), EPS_FLOOR)

    it = 0
    x_margin = w_margin = -np.inf
    best = -np.inf
    last_best = -np.inf
    for it in range(1, max_iter + 1):
        z_aff = proj_affine @ z
        xv, yv, wv = split(z_aff)
        Xw = np.linalg.eigvalsh(_unsvec(xv, n))
        Ww = np.linalg.eigvalsh(_unsvec(wv, n))
        x_margin, w_margin = float(Xw[0]), float(Ww[0])
        if x_margin >= eps_eff and w_margin >= eps_eff:
            z = z_aff
            break
        best = max(best, min(x_margin, w_margin))
        if it % 3000 == 0:
            # Margin plateau: the requested strictness is (numerically)
            # unreachable, relax toward the floor instead of spinning.
            if best <= last_best * 1.1 + EPS_FLOOR and eps_eff > EPS_FLOOR:
                eps_eff = max(0.1 * eps_eff, EPS_FLOOR)
            last_best = best
        # Dykstra step on the product cone.
        t = z_aff + cone_inc
        txv, tyv, twv = split(t)
        pxv, _ = _clip_psd(txv, n, 2.0 * eps_eff)
        pwv, _ = _clip_psd(twv, n, 2.0 * eps_eff)
        z_new = np.concatenate([pxv, tyv, pwv])
        cone_inc = t - z_new
        # Re-impose the trace normalization (the equality is homogeneous).
        tr = np.trace(_unsvec(z_new[:q], n))
        if tr > 1e-12 * n:
            s = n / tr
            z_new *= s
            cone_inc *= s
        z = z_new
    else:
        raise LmiInfeasibleError(
            f"gain equation solver did not converge in {max_iter} iterations "
            f"(margins {x_margin:.3e}/{w_margin:.3e}, eps {eps_eff:.1e}); the "
            "equation is feasible for every rho > 0, so check the inputs",
            iterations=max_iter, x_margin=x_margin, w_margin=w_margin)

    xv, yv, wv = split(z)
    X = _unsvec(xv, n)
    Y = yv.reshape((m, n), order="F")

    # Pin the free scale: smallest eigenvalue of X becomes exactly 1.
    lam_min = float(np.linalg.eigvalsh(X)[0])
    X = X / lam_min
    Y = Y / lam_min
    X = 0.5 * (X + X.T)

    resid = np.linalg.norm(
        A0 @ X + X @ A0.T + B @ Y + Y.T @ B.T + rho * (Gd @ X + X @ Gd.T))
    x_norm = float(np.linalg.norm(X, 2))
    if resid > TOL_EQ10_REL * x_norm:
        raise LmiInfeasibleError(
            f"gain equality residual {resid:.3e} exceeds "
            f"{TOL_EQ10_REL:.0e} * ||X|| = {TOL_EQ10_REL * x_norm:.3e}",
            iterations=it, equality_residual=float(resid),
            x_margin=x_margin, w_margin=w_margin)
    if not mk.is_pd(X, 0.5 * eps_eff / lam_min):
        raise LmiInfeasibleError("returned X misses the PD margin",
                                 iterations=it, x_margin=x_margin)

    if return_info:
        info = {
            "iterations": it,
            "equality_residual": float(resid),
            "x_margin": x_margin,
            "w_margin": w_margin,
            "eps_requested": eps_req,
            "eps_effective": eps_eff,
            "scale": 1.0 / lam_min,
        }
        return X, Y, info
    return X, Y


# ---------------------------------------------------------------------------
# Controller design container
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ControllerDesign:
    """Plant, certificates and gains of one homogeneous feedback design."""

    A: np.ndarray
    B: np.ndarray
    mu: float
    rho: float
    G0: np.ndarray
    Y0: np.ndarray
    G_d: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    K0: np.ndarray
    K: np.ndarray
    P: np.ndarray
    dilation: DilationSpec
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def A0(self):
        return self.A + self.B @ self.K0

    def hom_norm(self, x):
        return hom_norm(self.dilation, x)


def design_residuals(design):
    """All design invariant residuals, keyed by name."""
    A, B = design.A, design.B
    G0, Y0 = design.G0, design.Y0
    Gd, X, Y = design.G_d, design.X, design.Y
    mu, rho = design.mu, design.rho
    n = design.n
    A0 = design.A0
    I_n = np.eye(n)

    out = {}
    out["eq_sylvester"] = np.linalg.norm(A @ G0 - G0 @ A + B @ Y0 - A)
    out["eq_kernel"] = np.linalg.norm(G0 @ B)
    out["eq_commute"] = np.linalg.norm(A0 @ Gd - (Gd + mu * I_n) @ A0)
    out["eq_B_fixed"] = np.linalg.norm(Gd @ B - B)
    out["gain_equality"] = np.linalg.norm(
        A0 @ X + X @ A0.T + B @ Y + Y.T @ B.T + rho * (Gd @ X + X @ Gd.T))
    out["K0_def"] = np.linalg.norm(design.K0 - Y0 @ np.linalg.inv(G0 - I_n))
    out["K_def"] = np.linalg.norm(design.K - Y @ np.linalg.inv(X))
    R = mk.sqrtm_pd(X)
    Rinv = np.linalg.inv(R)
    S = Rinv @ (A0 + B @ design.K + rho * Gd) @ R
    out["rotation_skew"] = np.linalg.norm(S + S.T)
    out["_skew_scale"] = max(1.0, np.linalg.norm(S))
    return out


def validate_design(design):
    """Raise :class:`SynthesisError` if any design invariant is violated."""
    res = design_residuals(design)
    x_norm = float(np.linalg.norm(design.X, 2))
    # The skew residual is the gain-equality residual conjugated by
    # X^{-1/2}, so rounding alone contributes eps * cond(X); the nominal
    # 1e-8 tolerance stays binding wherever X is reasonably conditioned.
    cond_x = float(np.linalg.cond(design.X))
    skew_tol = max(TOL_SKEW, 16.0 * np.finfo(float).eps * cond_x)
    checks = [
        ("eq_sylvester", TOL_EQ8 * max(1.0, np.linalg.norm(design.A))),
        ("eq_kernel", TOL_EQ8),
        ("eq_commute", TOL_EQ9 * max(1.0, np.linalg.norm(design.A0))),
        ("eq_B_fixed", TOL_EQ9),
        ("gain_equality", TOL_EQ10_REL * x_norm),
        ("K0_def", 1e-10 * max(1.0, np.linalg.norm(design.K0))),
        ("K_def", 1e-10 * max(1.0, np.linalg.norm(design.K))),
        ("rotation_skew", skew_tol * res["_skew_scale"]),
    ]
    for name, tol in checks:
        if res[name] > tol:
            raise SynthesisError(
                f"design invariant '{name}' violated: residual "
                f"{res[name]:.3e} > tolerance {tol:.3e}")
    if not mk.is_pd(design.X, 0.0):
        raise NotPositiveDefiniteError("design X is not positive definite")
    W = design.G_d @ design.X + design.X @ design.G_d.T
    if not mk.is_pd(W, 0.0):
        raise NotPositiveDefiniteError("G_d X + X G_d^T is not positive definite")
    return res


def _assemble_design(A, B, mu, rho, G0, Y0, X, Y, diagnostics):
    n = A.shape[0]
    n_tilde = controllability_index(A, B)
    Gd = make_Gd(G0, mu, n_tilde)
    K0 = Y0 @ np.linalg.inv(G0 - np.eye(n))
    P = np.linalg.inv(X)
    P = 0.5 * (P + P.T)
    K = Y @ P
    spec = DilationSpec(G_d=Gd, mu=mu, P=P)
    design = ControllerDesign(
        A=A, B=B, mu=float(mu), rho=float(rho), G0=G0, Y0=Y0, G_d=Gd,
        X=X, Y=Y, K0=K0, K=K, P=P, dilation=spec,
        diagnostics=dict(diagnostics, controllability_index=n_tilde))
    validate_design(design)
    return design


def build_controller(A, B, mu, rho):
    """Full synthesis pipeline; returns a validated ControllerDesign."""
    A = mk.as_matrix(A, "A")
    B = mk.as_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise DimensionError(
            f"B has {B.shape[0]} rows but A is {A.shape[0]}x{A.shape[1]}")
    rho = float(rho)
    if rho <= 0.0:
        raise SynthesisError(f"rho must be positive, got {rho}")
    G0, Y0 = solve_G0_Y0(A, B)
    n_tilde = controllability_index(A, B)
    Gd = make_Gd(G0, mu, n_tilde)
    K0 = Y0 @ np.linalg.inv(G0 - np.eye(A.shape[0]))
    A0 = A + B @ K0
    X, Y, info = solve_gain_lmi(A0, B, Gd, rho, return_info=True)
    return _assemble_design(A, B, mu, rho, G0, Y0, X, Y, info)


def design_from_solution(A, B, mu, rho, X, Y):
    """Design from an externally supplied feasible (X, Y) pair.

    Used for closed-form gain-equation solutions; the pair is validated
    against every design invariant exactly like a solver output.
    """
    A = mk.as_matrix(A, "A")
    B = mk.as_matrix(B, "B")
    X = mk.as_symmetric(X, "X")
    Y = mk.as_matrix(Y, "Y")
    if not mk.is_pd(X):
        raise NotPositiveDefiniteError("supplied X is not positive definite")
    G0, Y0 = solve_G0_Y0(A, B)
    return _assemble_design(A, B, float(mu), float(rho), G0, Y0, X, Y,
                            {"source": "supplied"})


# ---------------------------------------------------------------------------
# Control law
# ---------------------------------------------------------------------------

def eval_control(design, x):
    """Homogeneous feedback u(x) = K0 x + ||x||_d^{1+mu} K d(-ln||x||_d) x.

    Returns the zero vector at x = 0: the continuous extension for
    mu > -1, and a convention for mu = -1 where the law is discontinuous
    at the origin.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    r = hom_norm(design.dilation, x)
    if r == 0.0:
        return np.zeros(design.m)
    D = dilation_at(design.dilation, -np.log(r))
    return design.K0 @ x + r ** (1.0 + design.mu) * (design.K @ (D @ x))


def lyapunov_decay_residual(design, x):
    """|d/dt ||x||_d + rho ||x||_d^{1+mu}| along the closed loop at x != 0."""
    x = np.asarray(x, dtype=float).reshape(-1)
    r = hom_norm(design.dilation, x)
    if r == 0.0:
        raise SynthesisError("decay residual undefined at the origin")
    g = hom_norm_gradient(design.dilation, x)
    xdot = design.A @ x + design.B @ eval_control(design, x)
    return float(abs(g @ xdot + design.rho * r ** (1.0 + design.mu)))
