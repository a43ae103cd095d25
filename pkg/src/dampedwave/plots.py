"""Deterministic SVG plots of a run directory.

Axes policy: the x axis spans the first to the last sample time; y limits
are matplotlib's automatic limits of the plotted data.  ``d`` and virial
residuals use a logarithmic y axis (non-positive values are dropped).
SVGs carry a fixed hash salt and no date, so re-plotting the same CSVs
gives byte-identical files.
"""
from __future__ import annotations

import csv
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["emit_plots", "read_csv"]

log = logging.getLogger(__name__)

HASH_SALT = "dampedwave"


def read_csv(path):
    """``(header, columns)`` with numeric columns as float arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], {}
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals)
    return header, cols


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def _series(cols, prefix):
    return sorted((k for k in cols if k.startswith(prefix)),
                  key=lambda k: int(k.rsplit("_", 1)[1]))


def _figure(title, xlabel="t"):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    return fig, ax


def _finish(ax, t):
    ax.set_xlim(t[0], t[-1])
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    ax.grid(True, alpha=0.3)


def _energy(cols, out):
    t = cols["t"]
    fig, ax = _figure("energy")
    ax.plot(t, cols["E"], label="E")
    ax.plot(t, cols["E_plus_Q"], "--", label="E + Q")
    _finish(ax, t)
    return [_save(fig, out / "energy.svg")]


def _modulation(cols, out):
    t = cols["t"]
    written = []
    d = cols["d"]
    keep = np.isfinite(d) & (d > 0)
    if keep.any():
        fig, ax = _figure("proximity d(t)")
        ax.semilogy(t[keep], d[keep])
        _finish(ax, t)
        written.append(_save(fig, out / "d.svg"))
    fig, ax = _figure("scales")
    for name in _series(cols, "lambda_"):
        ax.plot(t, cols[name], label=name)
    _finish(ax, t)
    written.append(_save(fig, out / "lambda.svg"))
    fig, ax = _figure("unstable and stable components")
    for name in _series(cols, "a_minus_") + _series(cols, "a_plus_"):
        ax.plot(t, cols[name], label=name)
    _finish(ax, t)
    written.append(_save(fig, out / "a_pm.svg"))
    return written


def _virial(cols, out):
    t = cols["t"]
    fig, ax = _figure("virial identity residuals")
    for name in (k for k in cols if k.startswith("residual_")):
        r = np.abs(cols[name])
        keep = r > 0
        if keep.any():
            ax.semilogy(t[keep], r[keep], label=name[len("residual_"):])
    _finish(ax, t)
    return [_save(fig, out / "virial.svg")]


_PLOTTERS = [("energy.csv", _energy), ("modulation.csv", _modulation),
             ("virial.csv", _virial)]


def emit_plots(run_dir):
    """Write the SVGs for whatever CSVs exist in ``run_dir``.

    Missing CSVs are skipped with a warning; CSVs with fewer than two rows
    produce no plot.  Returns the written paths.
    """
    run_dir = Path(run_dir)
    written = []
    with matplotlib.rc_context({"svg.hashsalt": HASH_SALT}):
        for name, fn in _PLOTTERS:
            path = run_dir / name
            if not path.exists():
                log.warning("%s missing, skipping its plots", name)
                continue
            _, cols = read_csv(path)
            if not cols or len(cols.get("t", [])) < 2:
                log.info("%s has no samples, nothing to plot", name)
                continue
            written += fn(cols, run_dir)
    return written
