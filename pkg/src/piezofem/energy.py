"""Energy functionals, the energy balance identity, and decay checks.

Three per-sample quadratic forms make up the damped energy

    eta_tilde(t) = v^T M v + u^T K_uu u + phi0^T K_phiphi phi0

and the accumulated dissipation

    gamma(t) = integral of 2*alpha * v^T M v + 2*beta * v^T K_uu v.

The balance identity equates ``F_l = eta_tilde + gamma`` with

    F_r = eta_tilde(0) + 2 * int phi_e(s) * (f_unit . v(s)) ds
                       - 2 * int phi_e'(s) * (g_unit . phi0(s)) ds,

so ``F_l - F_r`` is a per-sample residual that vanishes for the exact
semi-discrete solution; its size measures the combined time-integration
and quadrature error of a run. Time integrals use trapezoidal
quadrature on the sample grid, with the drive slopes taken one-sidedly
inside each interval so breakpoints of the piecewise-linear signal do
not smear.

A second, material-independent family of norms supports the a-priori
estimates: ``|u|_L2^2 = u^T (M/rho) u``, the strain seminorm
``|Bu|_L2^2 = u^T L_B u`` with unit-material stiffness, and the
potential gradient norm ``|phi0|_H1^2 = phi0^T L_phi phi0`` with unit
permittivity. Their sum ``eta = |v|^2 + |u|^2 + |Bu|^2 + |phi0|^2`` is
the quantity the a-priori bound controls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionViolated, VerificationFailure

__all__ = [
    "EnergyTracker",
    "EnergyReport",
    "DecayVerdict",
    "sample_energies",
    "check_energy_identity",
    "check_monotone_decay",
    "monotone_after_off",
]

CSV_COLUMNS = (
    "t",
    "norm_u_L2",
    "norm_Bu_L2",
    "norm_v_L2",
    "norm_phi_H1",
    "eta",
    "eta_tilde",
    "gamma",
    "residual_energy",
)


@dataclass
class EnergyReport:
    """Per-sample energy series of one run (all arrays share length)."""

    t: np.ndarray
    comp_kinetic: np.ndarray      # v^T M v
    comp_strain: np.ndarray       # u^T K_uu u
    comp_dielectric: np.ndarray   # phi0^T K_phiphi phi0
    eta_tilde: np.ndarray
    eta: np.ndarray
    gamma: np.ndarray
    F_l: np.ndarray
    F_r: np.ndarray
    residual_energy: np.ndarray
    norm_u_L2: np.ndarray
    norm_Bu_L2: np.ndarray
    norm_v_L2: np.ndarray
    norm_phi_H1: np.ndarray
    norm_Bv_L2: np.ndarray
    alpha: float
    beta: float
    t0_off: float | None

    @property
    def max_identity_residual(self) -> float:
        """max |F_l - F_r| / max(1, max F_r)."""
        if len(self.t) == 0:
            return 0.0
        scale = max(1.0, float(self.F_r.max(initial=0.0)))
        return float(np.abs(self.residual_energy).max()) / scale

    def csv_rows(self):
        """Rows of Python floats in the trajectory CSV column order."""
        data = np.column_stack([getattr(self, name) for name in CSV_COLUMNS])
        return [tuple(float(value) for value in row) for row in data]


class EnergyTracker:
    """Accumulates the energy series of a run, one state at a time.

    ``update`` must be called with every computed state in time order,
    starting with the initial one; the trapezoidal accumulators assume
    consecutive samples bound each integration interval.
    """

    def __init__(self, system, drive):
        self.system = system
        self.drive = drive
        self._rows: list[tuple] = []
        self._gamma = 0.0
        self._work_f = 0.0
        self._work_g = 0.0
        self._prev = None

    def update(self, state) -> dict:
        sys_ = self.system
        u, v, phi = state.u, state.v, state.phi0
        rho = sys_.material.rho

        Mv = sys_.M @ v
        kinetic = float(v @ Mv)
        strain = float(u @ (sys_.K_uu @ u))
        dielectric = float(phi @ (sys_.K_phiphi @ phi))
        eta_tilde = kinetic + strain + dielectric

        damp_rate = (
            2.0 * sys_.material.alpha * kinetic
            + 2.0 * sys_.material.beta * float(v @ (sys_.K_uu @ v))
        )
        u_l2_sq = float(u @ (sys_.M @ u)) / rho
        v_l2_sq = kinetic / rho
        bu_sq = float(u @ (sys_.L_B @ u))
        bv_sq = float(v @ (sys_.L_B @ v))
        phi_h1_sq = float(phi @ (sys_.L_phi @ phi))
        eta = v_l2_sq + u_l2_sq + bu_sq + phi_h1_sq

        phi_e = float(self.drive.phi_e(state.t))
        wf = 2.0 * phi_e * float(sys_.f_unit @ v)
        g_dot = float(sys_.g_unit @ phi)
        wg_left = 2.0 * self.drive.dphi_e(state.t, side="left") * g_dot
        wg_right = 2.0 * self.drive.dphi_e(state.t, side="right") * g_dot

        if self._prev is not None:
            t_prev, rate_prev, wf_prev, wg_right_prev = self._prev
            half = 0.5 * (state.t - t_prev)
            self._gamma += half * (rate_prev + damp_rate)
            self._work_f += half * (wf_prev + wf)
            self._work_g += half * (wg_right_prev + wg_left)
        self._prev = (state.t, damp_rate, wf, wg_right)

        if not self._rows:
            self._eta_tilde0 = eta_tilde
        F_l = eta_tilde + self._gamma
        F_r = self._eta_tilde0 + self._work_f - self._work_g
        row = {
            "t": state.t,
            "comp_kinetic": kinetic,
            "comp_strain": strain,
            "comp_dielectric": dielectric,
            "eta_tilde": eta_tilde,
            "eta": eta,
            "gamma": self._gamma,
            "F_l": F_l,
            "F_r": F_r,
            "residual_energy": F_l - F_r,
            "norm_u_L2": np.sqrt(max(u_l2_sq, 0.0)),
            "norm_Bu_L2": np.sqrt(max(bu_sq, 0.0)),
            "norm_v_L2": np.sqrt(max(v_l2_sq, 0.0)),
            "norm_phi_H1": np.sqrt(max(phi_h1_sq, 0.0)),
            "norm_Bv_L2": np.sqrt(max(bv_sq, 0.0)),
        }
        self._rows.append(tuple(row.values()))
        self._keys = tuple(row.keys())
        return row

    def report(self) -> EnergyReport:
        data = np.array(self._rows, dtype=float).reshape(len(self._rows), -1)
        columns = {
            key: data[:, i] for i, key in enumerate(self._keys)
        }
        return EnergyReport(
            alpha=self.system.material.alpha,
            beta=self.system.material.beta,
            t0_off=self.drive.t0_off,
            **columns,
        )


def sample_energies(system, state, drive, accumulators: EnergyTracker) -> dict:
    """Record one state in *accumulators* and return its energy row."""
    if accumulators.system is not system or accumulators.drive is not drive:
        raise PreconditionViolated(
            "accumulators were created for a different system or drive"
        )
    return accumulators.update(state)


def check_energy_identity(report: EnergyReport, tol: float | None = None):
    """Max relative energy-balance residual of *report*.

    With *tol* given, a violation raises :class:`VerificationFailure`;
    the residual is returned either way.
    """
    residual = report.max_identity_residual
    if tol is not None and residual > tol:
        raise VerificationFailure(
            f"energy identity residual {residual:.3e} exceeds "
            f"tolerance {tol:.1e}"
        )
    return residual


def monotone_after_off(
    report: EnergyReport, slack: float = 1.0e-6
) -> bool | None:
    """Observed monotone-decay flag for run summaries.

    Purely descriptive, asserting no damping hypotheses: ``None`` when
    the drive never switches off inside the sampled window, otherwise
    whether eta_tilde avoided per-step rises beyond ``slack`` times its
    switch-off value.
    """
    t0_off = report.t0_off
    if t0_off is None or len(report.t) == 0:
        return None
    idx = int(np.searchsorted(report.t, t0_off - 1.0e-15 * max(1.0, t0_off)))
    if idx >= len(report.t):
        return None
    tail = report.eta_tilde[idx:]
    max_rise = float(np.diff(tail).max(initial=0.0))
    return bool(max_rise <= slack * float(tail[0]))


@dataclass
class DecayVerdict:
    """Outcome of the post-drive energy decay check."""

    monotone: bool
    max_rise: float               # largest upward step, slack units
    eta_tilde_off: float          # eta_tilde at switch-off
    eta_tilde_final: float
    eta_tilde_max: float
    limit_ratio: float            # final / overall max
    components: dict[str, dict]


def check_monotone_decay(
    report: EnergyReport,
    t0_off: float | None = None,
    slack: float = 1.0e-6,
    component_fraction: float = 1.0e-2,
) -> DecayVerdict:
    """Check that eta_tilde decays monotonically after drive switch-off.

    Hypotheses: both Rayleigh coefficients strictly positive and a drive
    that switches off; violations raise :class:`PreconditionViolated`.
    Monotonicity tolerates per-step rises up to ``slack * eta_tilde`` at
    switch-off. Each energy component is additionally reported against
    ``component_fraction`` times its post-switch-off maximum.
    """
    if not (report.alpha > 0.0 and report.beta > 0.0):
        raise PreconditionViolated(
            f"decay check needs alpha, beta > 0, got alpha = "
            f"{report.alpha!r}, beta = {report.beta!r}"
        )
    if t0_off is None:
        t0_off = report.t0_off
    if t0_off is None:
        raise PreconditionViolated("drive never switches off")
    idx = int(np.searchsorted(report.t, t0_off - 1.0e-15 * max(1.0, t0_off)))
    if idx >= len(report.t):
        raise PreconditionViolated(
            f"no samples at or after switch-off time {t0_off!r}"
        )

    tail = report.eta_tilde[idx:]
    eta_off = float(tail[0])
    rises = np.diff(tail)
    max_rise = float(rises.max(initial=0.0))
    allowance = slack * eta_off
    monotone = bool(max_rise <= allowance)

    eta_max = float(report.eta_tilde.max(initial=0.0))
    final = float(report.eta_tilde[-1])
    components = {}
    for name in ("comp_kinetic", "comp_strain", "comp_dielectric"):
        series = getattr(report, name)[idx:]
        peak = float(series.max(initial=0.0))
        last = float(series[-1])
        threshold = component_fraction * peak
        components[name.removeprefix("comp_")] = {
            "max_after_off": peak,
            "final": last,
            "decayed": bool(last <= threshold) if peak > 0.0 else True,
        }
    if allowance > 0.0:
        rise_units = max_rise / allowance
    else:
        rise_units = 0.0 if max_rise <= 0.0 else np.inf
    return DecayVerdict(
        monotone=monotone,
        max_rise=rise_units,
        eta_tilde_off=eta_off,
        eta_tilde_final=final,
        eta_tilde_max=eta_max,
        limit_ratio=final / eta_max if eta_max > 0.0 else 0.0,
        components=components,
    )
