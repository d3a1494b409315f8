"""Batch figure rendering for homctl CSV outputs."""

from .render import (FigureSpec, RenderError, render_certificate,
                     render_comparison, render_control, render_trajectory)

__version__ = "0.1.0"
