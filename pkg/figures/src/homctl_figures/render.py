"""Render trajectory and certificate CSV files to PNG images.

Inputs are the documented homctl file formats only:

  trajectory CSV : header  t, x1..xn, u1..um, hom_norm
  certificate CSV: header  delta, lambda_min

The renderers are read-only over their inputs and deterministic: the same
CSV bytes produce the same PNG bytes.
"""

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = ["FigureSpec", "RenderError", "render_trajectory",
           "render_control", "render_certificate", "render_comparison"]

FIGURE_KINDS = ("trajectory", "control", "certificate", "comparison")

plt.rcParams["figure.dpi"] = 110
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3
plt.rcParams["font.size"] = 9


class RenderError(Exception):
    """Input CSV missing, too short, or lacking a required column."""


@dataclass(frozen=True)
class FigureSpec:
    """What to render, from which CSVs, into which image file."""

    inputs: tuple
    kind: str
    output: str
    title: str = ""
    xlabel: str = "t"
    ylabel: str = ""
    panel_titles: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; expected "
                              f"one of {FIGURE_KINDS}")
        paths = tuple(str(p) for p in (
            self.inputs if isinstance(self.inputs, (tuple, list))
            else (self.inputs,)))
        if not paths:
            raise RenderError("at least one input CSV is required")
        object.__setattr__(self, "inputs", paths)


def _read_csv(path):
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise RenderError(f"cannot read {path}: {exc}") from exc
    if data.dtype.names is None:
        raise RenderError(f"{path}: no header row found")
    if data.size == 0:
        raise RenderError(f"{path}: no data rows")
    return np.atleast_1d(data)


def _column(data, name, path):
    if name not in data.dtype.names:
        raise RenderError(f"{path}: missing required column {name!r}")
    return data[name]


def _trajectory_columns(data, path):
    names = data.dtype.names
    xs = sorted((n for n in names if n.startswith("x") and n[1:].isdigit()),
                key=lambda n: int(n[1:]))
    us = sorted((n for n in names if n.startswith("u") and n[1:].isdigit()),
                key=lambda n: int(n[1:]))
    if not xs:
        raise RenderError(f"{path}: missing required column 'x1'")
    if not us:
        raise RenderError(f"{path}: missing required column 'u1'")
    t = _column(data, "t", path)
    return t, xs, us


def _plot_states(ax, data, t, xs):
    for name in xs:
        ax.plot(t, data[name], label=name, linewidth=1.0)
    ax.legend(loc="upper right", fontsize=7)
    ax.set_ylabel("state")


def _plot_controls(ax, data, t, us):
    for name in us:
        ax.step(t, data[name], where="post", label=name, linewidth=1.0)
    ax.legend(loc="upper right", fontsize=7)
    ax.set_ylabel("control")


def _finish(fig, spec):
    if spec.title:
        fig.suptitle(spec.title)
    fig.savefig(spec.output, format="png")
    plt.close(fig)
    return spec.output


def render_trajectory(spec):
    """States and control against time; one column per input CSV."""
    cols = len(spec.inputs)
    fig, axes = plt.subplots(2, cols, figsize=(4.6 * cols, 5.2),
                             sharex="col", squeeze=False)
    for j, path in enumerate(spec.inputs):
        data = _read_csv(path)
        t, xs, us = _trajectory_columns(data, path)
        _plot_states(axes[0][j], data, t, xs)
        _plot_controls(axes[1][j], data, t, us)
        axes[1][j].set_xlabel(spec.xlabel)
        if spec.panel_titles and j < len(spec.panel_titles):
            axes[0][j].set_title(spec.panel_titles[j])
    fig.tight_layout()
    return _finish(fig, spec)


def render_control(spec):
    """Control signal only, one column per input CSV."""
    cols = len(spec.inputs)
    fig, axes = plt.subplots(1, cols, figsize=(4.6 * cols, 3.0),
                             squeeze=False)
    for j, path in enumerate(spec.inputs):
        data = _read_csv(path)
        t, _, us = _trajectory_columns(data, path)
        _plot_controls(axes[0][j], data, t, us)
        axes[0][j].set_xlabel(spec.xlabel)
        if spec.panel_titles and j < len(spec.panel_titles):
            axes[0][j].set_title(spec.panel_titles[j])
    fig.tight_layout()
    return _finish(fig, spec)


def render_certificate(spec):
    """Minimal certificate eigenvalue against the step scale.

    A single sample renders as a marker; data dipping to or below zero
    (a failed verdict) gets the zero line emphasized.
    """
    path = spec.inputs[0]
    data = _read_csv(path)
    delta = _column(data, "delta", path)
    lam = _column(data, "lambda_min", path)
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    if delta.size == 1:
        ax.plot(delta, lam, marker="o", linestyle="none")
    else:
        ax.plot(delta, lam, linewidth=1.2)
    ax.set_xscale("log")
    ax.set_xlabel(spec.xlabel if spec.xlabel != "t" else "delta")
    ax.set_ylabel(spec.ylabel or "lambda_min")
    failed = bool(np.any(lam <= 0.0))
    ax.axhline(0.0, color="red" if failed else "0.6",
               linewidth=1.6 if failed else 0.8)
    fig.tight_layout()
    return _finish(fig, spec)


def render_comparison(spec):
    """Two trajectory CSVs side by side (e.g. explicit vs consistent)."""
    if len(spec.inputs) != 2:
        raise RenderError("comparison figures need exactly two input CSVs")
    titles = spec.panel_titles or ("left", "right")
    return render_trajectory(FigureSpec(
        inputs=spec.inputs, kind="trajectory", output=spec.output,
        title=spec.title, xlabel=spec.xlabel, panel_titles=titles))
