"""JSON document formats for plants, designs and reports.

Documents carry a ``version`` field; step sizes, degrees and decay rates
are written as decimal strings so runs stay auditable byte-for-byte.
Matrices use the array-of-rows representation of
:func:`homctl.matrixkit.mat_to_json`.
"""

import json

import numpy as np

from . import matrixkit as mk
from .errors import ConfigError
from .mimo import CascadeDesign, cascade_design, decompose
from .synthesis import ControllerDesign, _assemble_design, solve_G0_Y0

__all__ = [
    "load_json", "parse_number", "plant_from_config", "design_to_jsonable",
    "design_from_jsonable", "cascade_to_jsonable", "cascade_from_jsonable",
    "load_design", "certificate_jsonable", "certificate_csv_lines",
]

FORMAT_VERSION = "1"


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def parse_number(value, name):
    """Accept a float or a decimal string for exactness-sensitive numbers."""
    if isinstance(value, bool) or value is None:
        raise ConfigError(f"{name} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} is not a number: {value!r}") from exc


def _num_str(value):
    return repr(float(value))


def _require(doc, key, where):
    if key not in doc:
        raise ConfigError(f"{where} is missing required key {key!r}")
    return doc[key]


def plant_from_config(doc):
    """Parse a plant configuration document.

    Returns ``(A, B, mu, rho, block_dims)`` where ``mu``/``rho`` are floats
    for a single-input plant and lists for a cascade (``block_dims`` is
    None for single input).
    """
    A = mk.mat_from_json(_require(doc, "A", "plant config"), "A")
    B = mk.mat_from_json(_require(doc, "B", "plant config"), "B")
    if B.shape[0] != A.shape[0]:
        raise ConfigError(
            f"A is {A.shape[0]}x{A.shape[1]} but B has {B.shape[0]} rows")
    block_dims = doc.get("block_dims")
    mu = _require(doc, "mu", "plant config")
    rho = _require(doc, "rho", "plant config")
    if block_dims is not None:
        block_dims = [int(d) for d in block_dims]
        mus = [parse_number(v, "mu") for v in np.atleast_1d(mu)]
        rhos = [parse_number(v, "rho") for v in np.atleast_1d(rho)]
        return A, B, mus, rhos, block_dims
    return A, B, parse_number(mu, "mu"), parse_number(rho, "rho"), None


def design_to_jsonable(design):
    return {
        "version": FORMAT_VERSION,
        "kind": "design",
        "plant": {"A": mk.mat_to_json(design.A), "B": mk.mat_to_json(design.B)},
        "mu": _num_str(design.mu),
        "rho": _num_str(design.rho),
        "G0": mk.mat_to_json(design.G0),
        "Y0": mk.mat_to_json(design.Y0),
        "G_d": mk.mat_to_json(design.G_d),
        "X": mk.mat_to_json(design.X),
        "Y": mk.mat_to_json(design.Y),
        "K0": mk.mat_to_json(design.K0),
        "K": mk.mat_to_json(design.K),
        "tolerances": {
            "equation_residual": 1e-9,
            "gain_equality_relative": 1e-8,
            "rotation_skew": 1e-8,
        },
        "diagnostics": _jsonable_dict(design.diagnostics),
    }


def design_from_jsonable(doc):
    """Rebuild and re-validate a design document."""
    if doc.get("kind") != "design":
        raise ConfigError(f"expected a design document, got kind {doc.get('kind')!r}")
    plant = _require(doc, "plant", "design document")
    A = mk.mat_from_json(_require(plant, "A", "plant"), "A")
    B = mk.mat_from_json(_require(plant, "B", "plant"), "B")
    mu = parse_number(_require(doc, "mu", "design document"), "mu")
    rho = parse_number(_require(doc, "rho", "design document"), "rho")
    G0 = mk.mat_from_json(_require(doc, "G0", "design document"), "G0")
    Y0 = mk.mat_from_json(_require(doc, "Y0", "design document"), "Y0")
    X = mk.as_symmetric(mk.mat_from_json(_require(doc, "X", "design document"), "X"), "X")
    Y = mk.mat_from_json(_require(doc, "Y", "design document"), "Y")
    diagnostics = dict(doc.get("diagnostics", {}))
    diagnostics["source"] = "document"
    return _assemble_design(A, B, mu, rho, G0, Y0, X, Y, diagnostics)


def cascade_to_jsonable(cascade):
    return {
        "version": FORMAT_VERSION,
        "kind": "cascade_design",
        "plant": {"A": mk.mat_to_json(cascade.A), "B": mk.mat_to_json(cascade.B)},
        "block_dims": list(cascade.block_dims),
        "blocks": [design_to_jsonable(d) for d in cascade.blocks],
        "couplings": [
            {"row_block": i + 1, "col_block": j + 1, "matrix": mk.mat_to_json(Aij)}
            for (i, j), Aij in sorted(cascade.couplings.items())
        ],
    }


def cascade_from_jsonable(doc):
    if doc.get("kind") != "cascade_design":
        raise ConfigError(
            f"expected a cascade design document, got kind {doc.get('kind')!r}")
    plant = _require(doc, "plant", "cascade document")
    A = mk.mat_from_json(_require(plant, "A", "plant"), "A")
    B = mk.mat_from_json(_require(plant, "B", "plant"), "B")
    dims = [int(d) for d in _require(doc, "block_dims", "cascade document")]
    skeleton = decompose(A, B, dims)
    blocks = tuple(design_from_jsonable(b)
                   for b in _require(doc, "blocks", "cascade document"))
    if len(blocks) != len(dims):
        raise ConfigError("cascade document block count does not match block_dims")
    return CascadeDesign(skeleton=skeleton, blocks=blocks)


def load_design(path):
    """Load either document kind from a file path."""
    doc = load_json(path)
    kind = doc.get("kind")
    if kind == "design":
        return design_from_jsonable(doc)
    if kind == "cascade_design":
        return cascade_from_jsonable(doc)
    raise ConfigError(f"unknown document kind {kind!r} in {path}")


def certificate_jsonable(report):
    radii = report.radii
    out = {
        "version": FORMAT_VERSION,
        "kind": "certificate",
        "method": report.method,
        "k_star": report.k_star,
        "r_star": report.r_star,
        "margin": report.margin,
        "verdict": "pass" if report.verdict else "fail",
        "grid": [float(v) for v in report.grid],
        "lambda_min": [float(v) for v in report.lambda_min_values],
        "notes": report.notes,
        "h_max": report.h_max,
    }
    if radii is not None:
        out["radii"] = {
            "mu": radii.mu,
            "r_lower_minus": radii.r_lower_minus,
            "r_upper_minus": radii.r_upper_minus,
            "r_lower_plus": radii.r_lower_plus,
            "r_upper_plus": radii.r_upper_plus,
            "empirical": list(radii.empirical),
        }
    return out


def certificate_csv_lines(report):
    lines = ["delta,lambda_min"]
    for d, v in zip(report.grid, report.lambda_min_values):
        lines.append(f"{repr(float(d))},{repr(float(v))}")
    return lines


def _jsonable_dict(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            out[k] = v.item()
        elif isinstance(v, np.ndarray):
            out[k] = mk.mat_to_json(v)
        else:
            out[k] = v
    return out


def build_from_config(doc):
    """Plant config -> validated design (single input or cascade)."""
    from .synthesis import build_controller

    A, B, mu, rho, block_dims = plant_from_config(doc)
    if block_dims is None:
        return build_controller(A, B, mu, rho)
    skeleton = decompose(A, B, block_dims)
    return cascade_design(skeleton, mu, rho)
