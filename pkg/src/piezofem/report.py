"""Run artifacts: delimited time series, JSON summaries, binary state
snapshots, and rendered figures.

All text artifacts are deterministic: floats are written with ``repr``
(shortest round-trip form), JSON keys are sorted, and row order follows
the step grid. Snapshot files are raw little-endian float64 with
explicit length prefixes so they can be read back without this package.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .energy import (
    CSV_COLUMNS,
    DecayVerdict,
    EnergyReport,
    monotone_after_off,
)
from .errors import ParseError
from .timeint import Drive, State

__all__ = [
    "write_trajectory_csv",
    "write_summary_json",
    "summary_dict",
    "SnapshotWriter",
    "read_snapshots",
    "render_figures",
]


def write_trajectory_csv(
    report: EnergyReport, path: str, stride: int = 1
) -> None:
    """Write the per-step energy and norm series as delimited text."""
    rows = report.csv_rows()
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(CSV_COLUMNS) + "\n")
        for k in range(0, len(rows), stride):
            handle.write(",".join(repr(v) for v in rows[k]) + "\n")
        # Always include the terminal sample even if stride skips it.
        if len(rows) and (len(rows) - 1) % stride != 0:
            handle.write(",".join(repr(v) for v in rows[-1]) + "\n")


def summary_dict(
    report: EnergyReport, verdict: DecayVerdict | None = None
) -> dict:
    """The canonical end-of-run summary mapping."""
    if verdict is not None:
        monotone = verdict.monotone
        components = verdict.components
    else:
        monotone = monotone_after_off(report)
        components = {
            "kinetic": {"final": float(report.comp_kinetic[-1])},
            "strain": {"final": float(report.comp_strain[-1])},
            "dielectric": {"final": float(report.comp_dielectric[-1])},
        }
    return {
        "monotone": monotone,
        "max_identity_residual": float(report.max_identity_residual),
        "eta_tilde_final": float(report.eta_tilde[-1]),
        "components": components,
    }


def write_summary_json(
    report: EnergyReport,
    path: str,
    verdict: DecayVerdict | None = None,
) -> dict:
    summary = summary_dict(report, verdict)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return summary


# ---------------------------------------------------------------------------
# Binary state snapshots
# ---------------------------------------------------------------------------

def _write_vector(handle, vector: np.ndarray) -> None:
    data = np.ascontiguousarray(vector, dtype="<f8")
    handle.write(struct.pack("<Q", data.size))
    handle.write(data.tobytes())


class SnapshotWriter:
    """Step observer that appends full states to a binary file.

    Record layout, all little-endian: time as one float64, then the
    four vectors u, v, a, phi0, each as a uint64 length followed by
    that many float64 values. Use as ``observers=(writer,)`` and close
    (or use as a context manager) when the run finishes.
    """

    def __init__(self, path: str, stride: int = 1):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.path = path
        self.stride = stride
        self.n_records = 0
        self._handle = open(path, "wb")

    def __call__(self, k: int, state: State) -> None:
        if k % self.stride != 0:
            return
        handle = self._handle
        handle.write(struct.pack("<d", float(state.t)))
        for vector in (state.u, state.v, state.a, state.phi0):
            _write_vector(handle, vector)
        self.n_records += 1

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False


def read_snapshots(path: str) -> list[State]:
    """Read back every record written by :class:`SnapshotWriter`."""
    states = []
    with open(path, "rb") as handle:
        data = handle.read()
    offset = 0
    total = len(data)

    def take(count: int) -> bytes:
        nonlocal offset
        if offset + count > total:
            raise ParseError(
                f"{path}: truncated snapshot record at byte {offset}"
            )
        chunk = data[offset:offset + count]
        offset += count
        return chunk

    while offset < total:
        t = struct.unpack("<d", take(8))[0]
        vectors = []
        for _ in range(4):
            (size,) = struct.unpack("<Q", take(8))
            vectors.append(
                np.frombuffer(take(8 * size), dtype="<f8").copy()
            )
        states.append(
            State(t=t, u=vectors[0], v=vectors[1], a=vectors[2],
                  phi0=vectors[3])
        )
    return states


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

def render_figures(
    report: EnergyReport,
    drive: Drive,
    out_dir: str,
    prefix: str = "",
) -> list[str]:
    """Render overview figures of a run to PNG files.

    Produces a drive/energy overview and, when damping is active, a
    semilog view of the damped-energy decay. Returns the written paths.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    t = report.t
    written = []

    fig, (ax_top, ax_bot) = plt.subplots(
        2, 1, sharex=True, figsize=(7.0, 5.6),
        gridspec_kw={"height_ratios": [1.0, 1.6]},
    )
    ax_top.plot(t, drive.phi_e(t), color="tab:red", lw=1.4)
    ax_top.set_ylabel("electrode voltage")
    ax_top.grid(True, alpha=0.3)
    ax_bot.plot(t, report.comp_kinetic, label="kinetic", lw=1.1)
    ax_bot.plot(t, report.comp_strain, label="strain", lw=1.1)
    ax_bot.plot(t, report.comp_dielectric, label="dielectric", lw=1.1)
    ax_bot.plot(t, report.eta_tilde, label="total", color="black", lw=1.5)
    ax_bot.set_xlabel("t")
    ax_bot.set_ylabel("energy")
    ax_bot.legend(loc="best", fontsize=9)
    ax_bot.grid(True, alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, f"{prefix}drive_response.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    if report.alpha > 0.0 or report.beta > 0.0:
        fig, ax = plt.subplots(figsize=(7.0, 4.2))
        positive = np.maximum(report.eta_tilde, 0.0)
        floor = positive.max(initial=0.0) * 1.0e-17
        ax.semilogy(t, np.maximum(positive, max(floor, 1.0e-300)),
                    color="black", lw=1.4)
        if report.t0_off is not None and report.t0_off <= t[-1]:
            ax.axvline(report.t0_off, color="tab:red", ls="--", lw=1.0,
                       label="drive off")
            ax.legend(loc="best", fontsize=9)
        ax.set_xlabel("t")
        ax.set_ylabel("stored energy")
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{prefix}energy_decay.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    return written
