"""SVG figures mirroring the CSV outputs.

Plots are a convenience layer; nothing downstream reads them. Rendering
uses the non-interactive Agg backend with a fixed hash salt and no date
stamp so repeated runs produce the same file.
"""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import atomic_write_text  # noqa: E402
from .spectra import RotationPattern, StickSpectrum  # noqa: E402

__all__ = ["plot_spectrum", "plot_rotation", "plot_trace", "plot_model"]

_RC = {"svg.hashsalt": "spinbench", "svg.fonttype": "path"}


def _save(fig, path) -> Path:
    buf = io.StringIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write_text(path, buf.getvalue())


def plot_spectrum(path, spectrum: StickSpectrum, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    styles = {"allowed": ("C0", "allowed"), "forbidden": ("C3", "forbidden"), "other": ("0.5", "other")}
    for kind, (color, name) in styles.items():
        sel = [ln for ln in spectrum.lines if ln.kind == kind]
        if sel:
            f = [ln.field_mT for ln in sel]
            m = [ln.moment for ln in sel]
            ax.vlines(f, 0, m, colors=color, label=name, linewidth=1.2)
    ax.set_xlim(*spectrum.field_range)
    ax.set_ylim(bottom=0)
    ax.set_xlabel("field (mT)")
    ax.set_ylabel("transition moment (µB)")
    if spectrum.lines:
        ax.legend(loc="upper right", fontsize=8)
    ax.set_title(title or f"{spectrum.mw_frequency_ghz:g} GHz")
    fig.tight_layout()
    return _save(fig, path)


def plot_rotation(path, pattern: RotationPattern, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 5))
    lines = pattern.lines()
    if lines:
        ang = np.array([ln.angle_deg for ln in lines])
        fld = np.array([ln.field_mT for ln in lines])
        mom = np.array([ln.moment for ln in lines])
        sc = ax.scatter(ang, fld, c=mom, s=4, cmap="viridis", vmin=0)
        fig.colorbar(sc, ax=ax, label="transition moment (µB)")
    ax.set_xlabel(f"angle in {pattern.plane} plane (deg)")
    ax.set_ylabel("field (mT)")
    ax.set_title(title or f"{pattern.mw_frequency_ghz:g} GHz")
    fig.tight_layout()
    return _save(fig, path)


def plot_trace(path, values, signal, xlabel: str = "swept value", ylabel: str = "signal") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(values, signal, "o-", markersize=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return _save(fig, path)


def plot_model(path, temperatures, times_us, ylabel: str = "time constant (µs)", log: bool = True) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(temperatures, times_us, "-")
    if log:
        ax.set_yscale("log")
    ax.set_xlabel("temperature (K)")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    return _save(fig, path)
