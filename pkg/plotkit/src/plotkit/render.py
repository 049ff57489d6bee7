"""Render figure analogues from buschain CSV files.

Three figure kinds are supported, one per CSV schema:

* zz: ZZ coupling (MHz, symmetric-log) versus bus frequency, one labelled
  curve per coupling strength;
* czscan: average CZ error (log) versus gate time, one curve per coupling;
* qscan: CZ error versus resonator quality factor (log-log) with the
  lossless baseline as a dashed horizontal line.

Input files are read only; headers must match the emitting tool exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("zz", "czscan", "qscan")

EXPECTED_HEADERS = {
    "zz": "bus_freq_ghz,g_mhz,zeta_mhz,ambiguous",
    "czscan": "gate_time_ns,g_mhz,nu_op_ghz,cond_phase_rad,leakage,error,reason",
    "qscan": "quality_factor,error,unitary_baseline",
}

FIGSIZE = (6.4, 4.8)
DPI = 144


class SchemaError(ValueError):
    """The CSV does not match the expected schema for the figure kind."""


@dataclass(frozen=True)
class FigureSpec:
    input_csv: str
    kind: str
    output_image: str
    log_x: bool = False
    log_y: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def read_table(path: str, kind: str) -> list[list[str]]:
    """Read a buschain CSV, skipping comment lines and checking the header."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body:
        raise SchemaError(f"{path}: no header line found")
    header, rows = body[0], body[1:]
    expected = EXPECTED_HEADERS[kind]
    if header != expected:
        raise SchemaError(f"{path}: header mismatch for kind {kind!r}: "
                          f"expected {expected!r}, found {header!r}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return [row.split(",") for row in rows]


def _margin(lo: float, hi: float, frac: float = 0.10) -> tuple[float, float]:
    span = (hi - lo) or abs(hi) or 1.0
    return lo - frac * span, hi + frac * span


def _group_by_g(rows, x_col, y_col, g_col=1):
    groups: dict[float, list[tuple[float, float]]] = {}
    for row in rows:
        if row[y_col] == "":
            continue
        groups.setdefault(float(row[g_col]), []).append((float(row[x_col]), float(row[y_col])))
    return groups


def _render_zz(rows, ax):
    groups = _group_by_g(rows, x_col=0, y_col=2)
    magnitudes = [abs(y) for pts in groups.values() for _, y in pts if y != 0.0]
    linthresh = max(min(magnitudes) if magnitudes else 1e-6, 1e-9)
    for g in sorted(groups):
        pts = groups[g]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=f"{g:g} MHz")
    ax.set_yscale("symlog", linthresh=linthresh)
    ax.set_xlabel("bus frequency (GHz)")
    ax.set_ylabel("ZZ coupling (MHz)")
    xs = [p[0] for pts in groups.values() for p in pts]
    ax.set_xlim(*_margin(min(xs), max(xs)))
    ax.legend(title="coupling")


def _render_czscan(rows, ax):
    groups = _group_by_g(rows, x_col=0, y_col=5)
    if not any(groups.values()):
        raise SchemaError("czscan: every row has an empty error value")
    for g in sorted(groups):
        pts = sorted(groups[g])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{g:g} MHz")
    ax.set_yscale("log")
    ax.set_xlabel("gate time (ns)")
    ax.set_ylabel("average CZ error")
    ax.legend(title="coupling")


def _render_qscan(rows, ax):
    qs, errors, baselines = [], [], []
    for row in rows:
        q = float(row[0])
        if np.isfinite(q):
            qs.append(q)
            errors.append(float(row[1]))
        baselines.append(float(row[2]))
    if not qs:
        raise SchemaError("qscan: no finite quality factors to plot")
    order = np.argsort(qs)
    qs = np.asarray(qs)[order]
    errors = np.asarray(errors)[order]
    ax.plot(qs, errors, marker="o", label="with resonator decay")
    ax.axhline(baselines[0], linestyle="--", color="black", label="lossless baseline")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("resonator quality factor")
    ax.set_ylabel("average CZ error")
    ax.legend()


_RENDERERS = {"zz": _render_zz, "czscan": _render_czscan, "qscan": _render_qscan}


def render(spec: FigureSpec):
    """Render the figure described by spec and write the image file.

    Returns the matplotlib figure (useful for inspection in tests).
    """
    rows = read_table(spec.input_csv, spec.kind)
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    try:
        _RENDERERS[spec.kind](rows, ax)
        fig.tight_layout()
        fig.savefig(spec.output_image)
    except Exception:
        plt.close(fig)
        raise
    return fig
