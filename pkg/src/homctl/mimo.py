"""Cascade (block upper-triangular) multi-input designs.

A multi-input plant qualifies when A is block upper-triangular, B is block
diagonal with one input per block, and every diagonal pair {A_i, B_i} is
controllable with nilpotent A_i.  Each block then gets its own single-input
homogeneous design (with its own dilation and weighted norm; no global
dilation is formed), and the sampled-data schemes apply blockwise to the
block components of the measured state.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import matrixkit as mk
from .discretization import build_scheme, consistent_control, full_control_sequence
from .errors import DimensionError, StructureError, SynthesisError
from .synthesis import build_controller, controllability_index

__all__ = ["CascadeSkeleton", "CascadeDesign", "decompose", "cascade_design",
           "cascade_schemes", "cascade_full_sequence",
           "cascade_consistent_control"]


@dataclass(frozen=True, eq=False)
class CascadeSkeleton:
    """Verified block decomposition of a cascade plant."""

    A: np.ndarray
    B: np.ndarray
    block_dims: tuple
    blocks: tuple          # ((A_1, B_1), ..., (A_m, B_m))
    couplings: dict        # {(i, j): A_ij} for j > i, nonzero blocks only

    @property
    def m(self):
        return len(self.block_dims)


@dataclass(frozen=True, eq=False)
class CascadeDesign:
    """Per-block controller designs plus the coupling structure."""

    skeleton: CascadeSkeleton
    blocks: tuple          # ControllerDesign per block

    @property
    def A(self):
        return self.skeleton.A

    @property
    def B(self):
        return self.skeleton.B

    @property
    def block_dims(self):
        return self.skeleton.block_dims

    @property
    def couplings(self):
        return self.skeleton.couplings

    @property
    def m(self):
        return len(self.blocks)

    @property
    def n(self):
        return self.skeleton.A.shape[0]

    def block_slices(self):
        out = []
        start = 0
        for ni in self.block_dims:
            out.append(slice(start, start + ni))
            start += ni
        return out


def decompose(A, B, block_dims):
    """Validate the cascade structure and extract blocks and couplings.

    Raises :class:`StructureError` naming the first offending block when A
    has a nonzero entry below the block diagonal or B has a nonzero
    off-diagonal block, and when a diagonal block is uncontrollable or not
    nilpotent.  No coordinate transformation is attempted: the plant must
    already be in cascade form.
    """
    A = mk.as_matrix(A, "A")
    B = mk.as_matrix(B, "B")
    dims = tuple(int(d) for d in block_dims)
    n = A.shape[0]
    m = len(dims)
    if any(d < 1 for d in dims):
        raise DimensionError("block dimensions must be positive")
    if sum(dims) != n:
        raise DimensionError(
            f"block dimensions sum to {sum(dims)}, state dimension is {n}")
    if B.shape != (n, m):
        raise DimensionError(
            f"B must be {n}x{m} (one input per block), got {B.shape}")

    offs = np.cumsum((0,) + dims)
    blocks = []
    couplings = {}
    for i in range(m):
        ri = slice(offs[i], offs[i + 1])
        for j in range(m):
            cj = slice(offs[j], offs[j + 1])
            blk = A[ri, cj]
            if j < i and np.any(blk != 0.0):
                raise StructureError(
                    f"A has a nonzero block below the diagonal at ({i + 1}, {j + 1})")
            if j > i and np.any(blk != 0.0):
                couplings[(i, j)] = blk.copy()
        Bi = B[ri, i:i + 1]
        for j in range(m):
            if j != i and np.any(B[ri, j] != 0.0):
                raise StructureError(
                    f"B has a nonzero off-diagonal block at ({i + 1}, {j + 1})")
        Ai = A[ri, ri]
        ni = dims[i]
        power = np.linalg.matrix_power(Ai, ni)
        if np.max(np.abs(power)) > 1e-12 * max(1.0, np.max(np.abs(Ai)) ** ni):
            raise StructureError(f"diagonal block {i + 1} is not nilpotent")
        try:
            controllability_index(Ai, Bi)
        except Exception as exc:
            raise StructureError(f"diagonal block {i + 1}: {exc}") from exc
        blocks.append((Ai.copy(), Bi.copy()))
    return CascadeSkeleton(A=A, B=B, block_dims=dims, blocks=tuple(blocks),
                           couplings=couplings)


def cascade_design(skeleton, mu, rho):
    """Blockwise synthesis; degrees must share one sign."""
    mus = [float(v) for v in np.atleast_1d(mu)]
    rhos = [float(v) for v in np.atleast_1d(rho)]
    m = skeleton.m
    if len(mus) == 1:
        mus = mus * m
    if len(rhos) == 1:
        rhos = rhos * m
    if len(mus) != m or len(rhos) != m:
        raise DimensionError(f"need {m} degrees and {m} decay rates")
    signs = {np.sign(v) for v in mus}
    if 0.0 in signs or len(signs) != 1:
        raise SynthesisError(
            "cascade degrees must be nonzero and share one sign, got "
            f"{mus}")
    designs = tuple(build_controller(Ai, Bi, mu_i, rho_i)
                    for (Ai, Bi), mu_i, rho_i
                    in zip(skeleton.blocks, mus, rhos))
    return CascadeDesign(skeleton=skeleton, blocks=designs)


def cascade_schemes(cascade, h):
    """Per-block sampled schemes at a common step."""
    return tuple(build_scheme(d, h) for d in cascade.blocks)


def cascade_full_sequence(cascade, h, x_k, schemes=None):
    """Blockwise exact-tracking programs, one per block.

    Returns a list with block i's n_i chronological control values,
    computed from that block's own components of x_k.
    """
    x_k = np.asarray(x_k, dtype=float).reshape(-1)
    if x_k.shape[0] != cascade.n:
        raise DimensionError(f"state has dim {x_k.shape[0]}, expected {cascade.n}")
    if schemes is None:
        schemes = cascade_schemes(cascade, h)
    out = []
    for sl, scheme in zip(cascade.block_slices(), schemes):
        out.append(full_control_sequence(scheme, x_k[sl]))
    return out


def cascade_consistent_control(cascade, h, x_k, schemes=None, certified=None):
    """Blockwise consistent static feedback, stacked into one control vector.

    ``certified`` may flag per-block certificate outcomes; blocks flagged
    False raise a warning (certification remains the caller's
    responsibility and is not re-checked here).
    """
    x_k = np.asarray(x_k, dtype=float).reshape(-1)
    if x_k.shape[0] != cascade.n:
        raise DimensionError(f"state has dim {x_k.shape[0]}, expected {cascade.n}")
    if certified is not None:
        bad = [i + 1 for i, ok in enumerate(certified) if not ok]
        if bad:
            warnings.warn(f"cascade blocks {bad} are not certified; the "
                          "consistent feedback may fail to contract there",
                          stacklevel=2)
    if schemes is None:
        schemes = cascade_schemes(cascade, h)
    u = np.empty(cascade.m)
    for i, (sl, scheme) in enumerate(zip(cascade.block_slices(), schemes)):
        u[i] = consistent_control(scheme, x_k[sl])[0]
    return u
