"""Sampled-data closed-loop simulation with exact intersample propagation.

The plant is linear, so between samples the state is propagated with the
matrix exponential rather than an ODE stepper; the discretization scheme
under study is then the only discrete-time effect in the experiment.
Additive disturbances enter through an exactly propagated piecewise-
constant quadrature (``substeps`` sub-intervals per sample), measurement
noise perturbs only the state fed to the controller at sample instants.

Scheme kinds
------------
consistent    : static feedback u = K_h(||x||_d) x (chattering-free)
full_sequence : n-step exact-tracking program, re-planned every n samples
explicit      : zero-order hold of the continuous homogeneous feedback
open_loop     : u = 0

Runs are deterministic: identical configurations and seeds produce
bit-identical trajectories.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import matrixkit as mk
from .dilation import hom_norm
from .discretization import build_scheme, consistent_control, full_control_sequence
from .errors import ConfigError, DimensionError
from .mimo import CascadeDesign, cascade_schemes
from .synthesis import ControllerDesign, eval_control

__all__ = ["PerturbationSpec", "SimConfig", "Trajectory", "simulate",
           "settling_time", "chattering_index", "iss_sweep", "IssRow",
           "trajectory_csv_lines", "write_trajectory"]

SCHEME_KINDS = ("consistent", "full_sequence", "explicit", "open_loop")

#: State magnitude treated as divergence.  Chosen below the overflow
#: threshold of the squared weighted norm so the guard fires before any
#: arithmetic degenerates.
DIVERGENCE_GUARD = 1e150


@dataclass(frozen=True)
class PerturbationSpec:
    """Seeded bounded disturbance and measurement-noise generators.

    Component-wise uniform draws in [-magnitude, magnitude]; the
    disturbance q_p is re-drawn on every quadrature sub-interval, the
    noise q_m once per sample.  Everything is a pure function of (seed,
    sample count, substeps, dimension), which is what makes runs
    reproducible.
    """

    qp_magnitude: float = 0.0
    qm_magnitude: float = 0.0
    seed: int = 0

    @property
    def active(self):
        return self.qp_magnitude > 0.0 or self.qm_magnitude > 0.0


@dataclass(frozen=True)
class SimConfig:
    scheme_kind: str
    h: float
    t_final: float
    x0: np.ndarray
    perturbation: PerturbationSpec = None
    substeps: int = 16

    def __post_init__(self):
        if self.scheme_kind not in SCHEME_KINDS:
            raise ConfigError(f"unknown scheme kind {self.scheme_kind!r}; "
                              f"expected one of {SCHEME_KINDS}")
        if self.h <= 0.0:
            raise ConfigError(f"step must be positive, got {self.h}")
        if self.t_final < self.h:
            raise ConfigError("horizon must cover at least one step")
        if self.substeps < 1:
            raise ConfigError("substeps must be at least 1")
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(-1))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    hom_norms: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def diverged(self):
        return bool(self.metadata.get("diverged", False))


def _design_fingerprint(design):
    if isinstance(design, CascadeDesign):
        payload = [mk.mat_to_json(d.K) for d in design.blocks]
    else:
        payload = mk.mat_to_json(design.K)
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _make_controller(design, config):
    """Returns (control_fn, m); control_fn maps (k, measured state) -> u."""
    kind = config.scheme_kind
    if isinstance(design, CascadeDesign):
        slices = design.block_slices()
        if kind == "open_loop":
            return (lambda k, xm: np.zeros(design.m)), design.m
        if kind == "explicit":
            def ctrl(k, xm):
                return np.array([eval_control(d, xm[sl])[0]
                                 for d, sl in zip(design.blocks, slices)])
            return ctrl, design.m
        schemes = cascade_schemes(design, config.h)
        if kind == "consistent":
            def ctrl(k, xm):
                return np.array([consistent_control(s, xm[sl])[0]
                                 for s, sl in zip(schemes, slices)])
            return ctrl, design.m
        programs = [None] * design.m

        def ctrl(k, xm):
            u = np.empty(design.m)
            for i, (s, sl) in enumerate(zip(schemes, slices)):
                ni = s.n
                if k % ni == 0:
                    programs[i] = full_control_sequence(s, xm[sl])
                u[i] = programs[i][k % ni]
            return u
        return ctrl, design.m

    if not isinstance(design, ControllerDesign):
        raise ConfigError(f"unsupported design object {type(design).__name__}")
    if kind == "open_loop":
        return (lambda k, xm: np.zeros(design.m)), design.m
    if kind == "explicit":
        return (lambda k, xm: eval_control(design, xm)), design.m
    scheme = build_scheme(design, config.h)
    if kind == "consistent":
        return (lambda k, xm: consistent_control(scheme, xm)), design.m
    n = design.n
    program = {}

    def ctrl(k, xm):
        if k % n == 0:
            program["u"] = full_control_sequence(scheme, xm)
        return np.array([program["u"][k % n]])
    return ctrl, design.m


def _hom_norm_of(design, x):
    if isinstance(design, CascadeDesign):
        return max(hom_norm(d.dilation, x[sl])
                   for d, sl in zip(design.blocks, design.block_slices()))
    return hom_norm(design.dilation, x)


def simulate(design, config):
    """Closed-loop run of a design (or cascade) under one configuration.

    Intersample propagation is exact; with an active disturbance the
    integral of e^{A(h-s)} q_p is approximated by holding q_p constant on
    each of ``substeps`` sub-intervals, each propagated exactly.  A state
    beyond the divergence guard truncates the run and flags the returned
    trajectory (a diagnostic prefix, not an error).
    """
    A = design.A
    B = design.B
    n = A.shape[0]
    x0 = config.x0
    if x0.shape[0] != n:
        raise DimensionError(f"x0 has dim {x0.shape[0]}, expected {n}")

    control_fn, m = _make_controller(design, config)
    h = config.h
    steps = int(round(config.t_final / h))
    pert = config.perturbation or PerturbationSpec()

    A_h, B_h = mk.discretize_pair(A, B, h)
    use_substeps = pert.qp_magnitude > 0.0
    if use_substeps:
        dt = h / config.substeps
        A_d, B_d = mk.discretize_pair(A, B, dt)
        _, D_d = mk.discretize_pair(A, np.eye(n), dt)  # int_0^dt e^{sA} ds
        rng = np.random.default_rng(pert.seed)
        qp_draws = rng.uniform(-pert.qp_magnitude, pert.qp_magnitude,
                               size=(steps, config.substeps, n))
        qm_draws = rng.uniform(-pert.qm_magnitude, pert.qm_magnitude,
                               size=(steps + 1, n)) if pert.qm_magnitude > 0 \
            else np.zeros((steps + 1, n))
    else:
        rng = np.random.default_rng(pert.seed)
        qm_draws = rng.uniform(-pert.qm_magnitude, pert.qm_magnitude,
                               size=(steps + 1, n)) if pert.qm_magnitude > 0 \
            else np.zeros((steps + 1, n))

    times, states, controls, norms = [], [], [], []
    diverged = False
    x = x0.copy()
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        for k in range(steps + 1):
            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_GUARD:
                diverged = True
                break
            u = control_fn(k, x + qm_draws[k])
            if not np.all(np.isfinite(u)):
                diverged = True
                break
            times.append(k * h)
            states.append(x.copy())
            controls.append(np.asarray(u, dtype=float).copy())
            norms.append(_hom_norm_of(design, x))
            if k == steps:
                break
            if use_substeps:
                for j in range(config.substeps):
                    x = A_d @ x + B_d @ u + D_d @ qp_draws[k, j]
            else:
                x = A_h @ x + B_h @ u

    metadata = {
        "scheme": config.scheme_kind,
        "h": h,
        "t_final": config.t_final,
        "substeps": config.substeps,
        "x0": [float(v) for v in x0],
        "qp_magnitude": pert.qp_magnitude,
        "qm_magnitude": pert.qm_magnitude,
        "seed": pert.seed,
        "design": _design_fingerprint(design),
        "diverged": diverged,
        "samples": len(times),
    }
    return Trajectory(times=np.array(times), states=np.array(states),
                      controls=np.array(controls), hom_norms=np.array(norms),
                      metadata=metadata)


def settling_time(traj, threshold=1e-9):
    """First sample instant after which ||x|| stays within the threshold.

    Returns None when the trajectory never settles (including truncated
    diverging runs).
    """
    if traj.states.size == 0:
        return None
    with np.errstate(over="ignore"):
        norms = np.linalg.norm(traj.states, axis=1)
    above = np.nonzero(norms > threshold)[0]
    if traj.diverged:
        return None
    if above.size == 0:
        return 0.0
    last = above[-1]
    if last == len(norms) - 1:
        return None
    return float(traj.times[last + 1])


def chattering_index(traj, tail_fraction=0.2):
    """Total variation rate of the control over the trajectory tail."""
    if not 0.0 < tail_fraction <= 1.0:
        raise ConfigError("tail_fraction must lie in (0, 1]")
    if traj.controls.shape[0] < 2:
        return 0.0
    t_end = traj.times[-1]
    t_start = t_end - tail_fraction * (t_end - traj.times[0])
    idx = np.nonzero(traj.times >= t_start - 1e-12)[0]
    if idx.size < 2:
        return 0.0
    u = traj.controls[idx]
    with np.errstate(over="ignore"):
        tv = float(np.sum(np.linalg.norm(np.diff(u, axis=0), axis=1)))
    span = float(traj.times[idx[-1]] - traj.times[idx[0]])
    return tv / span if span > 0 else 0.0


@dataclass(frozen=True)
class IssRow:
    qm_magnitude: float
    qp_magnitude: float
    seeds: tuple
    bounds: tuple          # sup ||x||_2 over the final 20% of each trial
    hom_bounds: tuple      # same in the homogeneous norm
    mean_bound: float
    max_bound: float
    any_diverged: bool


def iss_sweep(design, noise_magnitudes, disturbance_magnitudes, trials,
              *, h=0.05, t_final=20.0, x0=None, scheme_kind="consistent",
              substeps=16, base_seed=0):
    """Empirical ultimate-bound table over noise/disturbance magnitudes.

    For every magnitude pair, ``trials`` seeded runs record the supremum
    of the state norm over the final 20% of the horizon.  The table is
    reported as-is; monotonicity in the disturbance magnitude is a
    property for the caller (or the test suite) to inspect, not a hard
    assertion.
    """
    if x0 is None:
        x0 = np.ones(design.A.shape[0])
    rows = []
    for qm in noise_magnitudes:
        for qp in disturbance_magnitudes:
            bounds, hom_bounds, seeds = [], [], []
            any_div = False
            for trial in range(trials):
                seed = base_seed + trial
                cfg = SimConfig(scheme_kind=scheme_kind, h=h, t_final=t_final,
                                x0=x0,
                                perturbation=PerturbationSpec(
                                    qp_magnitude=float(qp),
                                    qm_magnitude=float(qm), seed=seed),
                                substeps=substeps)
                traj = simulate(design, cfg)
                any_div = any_div or traj.diverged
                tail = traj.times >= traj.times[-1] - 0.2 * (
                    traj.times[-1] - traj.times[0])
                bounds.append(float(np.max(np.linalg.norm(
                    traj.states[tail], axis=1))))
                hom_bounds.append(float(np.max(traj.hom_norms[tail])))
                seeds.append(seed)
            rows.append(IssRow(
                qm_magnitude=float(qm), qp_magnitude=float(qp),
                seeds=tuple(seeds), bounds=tuple(bounds),
                hom_bounds=tuple(hom_bounds),
                mean_bound=float(np.mean(bounds)),
                max_bound=float(np.max(bounds)),
                any_diverged=any_div))
    return rows


# ---------------------------------------------------------------------------
# File interfaces
# ---------------------------------------------------------------------------

def trajectory_csv_lines(traj):
    """CSV rows ``t, x1..xn, u1..um, hom_norm`` (header first)."""
    n = traj.states.shape[1] if traj.states.size else 0
    m = traj.controls.shape[1] if traj.controls.size else 0
    header = (["t"] + [f"x{i + 1}" for i in range(n)]
              + [f"u{i + 1}" for i in range(m)] + ["hom_norm"])
    lines = [",".join(header)]
    for k in range(len(traj.times)):
        row = [repr(float(traj.times[k]))]
        row += [repr(float(v)) for v in traj.states[k]]
        row += [repr(float(v)) for v in traj.controls[k]]
        row.append(repr(float(traj.hom_norms[k])))
        lines.append(",".join(row))
    return lines


def write_trajectory(traj, csv_path, meta_path=None):
    """Write the trajectory CSV plus its metadata sidecar JSON."""
    text = "\n".join(trajectory_csv_lines(traj)) + "\n"
    with open(csv_path, "w") as fh:
        fh.write(text)
    if meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump(traj.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")
