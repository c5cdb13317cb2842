"""Implicit transient integration of the coupled electromechanical system.

The semi-discrete system produced by :mod:`piezofem.assembly` is

    M u'' + C u' + K_uu u + K_uphi phi0 = phi_e(t) * f_unit + extra_u(t)
    K_phiphi phi0 = K_uphi^T u - phi_e(t) * g_unit - extra_phi(t)

with the second (electrostatic) equation enforced on free potential
nodes only; constrained entries of ``phi0`` are identically zero.

Stepping uses the HHT-alpha method: Newmark kinematics with
``beta = (1 - alpha_h)^2 / 4`` and ``gamma = 1/2 - alpha_h``, internal
elastic and damping forces blended between the step endpoints as
``(1 + alpha_h) * F_{n+1} - alpha_h * F_n``, and the external load
evaluated at the alpha-shifted time ``t_n + (1 + alpha_h) * dt``. For
``alpha_h = 0`` this is the trapezoidal (average-acceleration) rule;
negative values add controlled high-frequency dissipation while keeping
second-order accuracy.

Each step solves one symmetric positive-definite system for the
acceleration, with the potential eliminated through the factorized free
dielectric block (condensed stiffness ``K* = K_uu + A Kff^-1 A^T``),
then recovers ``phi0`` consistently with the end-of-step displacement.
All factorizations are computed once per stepper and reused.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .assembly import AssembledSystem
from .energy import EnergyReport, EnergyTracker
from .errors import InvalidScalar, NonFiniteState, ParseError, SolveFailure

__all__ = [
    "Drive",
    "State",
    "HHTParams",
    "HHTStepper",
    "Trajectory",
    "solve_potential",
    "initialize",
    "hht_step",
    "run",
]

# extra_load(t) -> (load_u, load_phi); see the module docstring for the
# side of the equations each vector lands on.
ExtraLoad = Callable[[float], tuple[np.ndarray, np.ndarray]]


class Drive:
    """Piecewise-linear electrode voltage signal.

    The signal is a linear interpolant of ``(time, value)`` samples and
    holds its end values outside the sample range. ``t0_off`` is the
    earliest time after which the signal is identically zero (the end of
    the last segment with a nonzero endpoint), or ``None`` if the signal
    never switches off.
    """

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size == 0:
            raise InvalidScalar("drive table must be two equal 1d columns")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
            raise InvalidScalar("drive table contains non-finite entries")
        if times.size > 1 and not np.all(np.diff(times) > 0.0):
            raise InvalidScalar("drive sample times must strictly increase")
        self.times = times
        self.values = values
        self.t0_off = self._compute_t0_off()

    def _compute_t0_off(self) -> float | None:
        nonzero = np.nonzero(self.values)[0]
        if len(nonzero) == 0:
            return 0.0
        last = int(nonzero[-1])
        if last == len(self.values) - 1:
            return None          # holds a nonzero value forever
        return float(self.times[last + 1])

    @classmethod
    def zero(cls) -> "Drive":
        return cls([0.0], [0.0])

    @classmethod
    def constant(cls, value: float) -> "Drive":
        return cls([0.0], [float(value)])

    @classmethod
    def trapezoid(
        cls,
        amplitude: float,
        t_rise: float,
        t_hold: float,
        t_fall: float,
        t_start: float = 0.0,
    ) -> "Drive":
        """Ramp to *amplitude* over ``t_rise``, hold, ramp back to zero."""
        for name, value in (("t_rise", t_rise), ("t_fall", t_fall)):
            if not value > 0.0:
                raise InvalidScalar(f"{name} must be > 0, got {value!r}")
        if t_hold < 0.0:
            raise InvalidScalar(f"t_hold must be >= 0, got {t_hold!r}")
        times = [t_start, t_start + t_rise]
        values = [0.0, float(amplitude)]
        if t_hold > 0.0:
            times.append(t_start + t_rise + t_hold)
            values.append(float(amplitude))
        times.append(t_start + t_rise + t_hold + t_fall)
        values.append(0.0)
        return cls(times, values)

    @classmethod
    def from_table(cls, path) -> "Drive":
        """Load a two-column CSV of ``time, value`` samples."""
        try:
            data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        except (OSError, ValueError) as exc:
            raise ParseError(f"cannot read drive table {path}: {exc}") from exc
        if data.shape[1] != 2:
            raise ParseError(
                f"drive table {path} has {data.shape[1]} columns, expected 2"
            )
        try:
            return cls(data[:, 0], data[:, 1])
        except InvalidScalar as exc:
            raise ParseError(f"drive table {path}: {exc}") from exc

    def phi_e(self, t):
        """Signal value at time(s) *t*."""
        return np.interp(t, self.times, self.values)

    def dphi_e(self, t: float, side: str = "right") -> float:
        """Exact slope at *t*, taking the segment on the given side of
        any breakpoint. Zero outside the sample range."""
        ts, vs = self.times, self.values
        if len(ts) == 1:
            return 0.0
        i = int(np.searchsorted(ts, t, side=side)) - 1
        if i < 0 or i >= len(ts) - 1:
            return 0.0
        return float((vs[i + 1] - vs[i]) / (ts[i + 1] - ts[i]))

    def scaled(self, factor: float) -> "Drive":
        return Drive(self.times.copy(), factor * self.values)

    def h1_measure(self, t_end: float) -> float:
        """Exact H1(0, t_end) norm of the piecewise-linear signal."""
        breaks = np.unique(
            np.concatenate([[0.0, t_end], np.clip(self.times, 0.0, t_end)])
        )
        total = 0.0
        for t0, t1 in zip(breaks[:-1], breaks[1:]):
            dt = t1 - t0
            if dt <= 0.0:
                continue
            v0, v1 = float(self.phi_e(t0)), float(self.phi_e(t1))
            total += dt * (v0 * v0 + v0 * v1 + v1 * v1) / 3.0
            slope = self.dphi_e(0.5 * (t0 + t1))
            total += dt * slope * slope
        return float(np.sqrt(total))


@dataclass
class State:
    """Solver state at one time level."""

    t: float
    u: np.ndarray
    v: np.ndarray
    a: np.ndarray
    phi0: np.ndarray


@dataclass(frozen=True)
class HHTParams:
    """HHT-alpha parameters; only ``alpha_h`` is independent."""

    alpha_h: float = -0.05

    def __post_init__(self):
        if not -1.0 / 3.0 <= self.alpha_h <= 0.0:
            raise InvalidScalar(
                f"alpha_h must lie in [-1/3, 0], got {self.alpha_h!r}"
            )

    @property
    def beta_n(self) -> float:
        return 0.25 * (1.0 - self.alpha_h) ** 2

    @property
    def gamma_n(self) -> float:
        return 0.5 - self.alpha_h


def solve_potential(
    system: AssembledSystem,
    u: np.ndarray,
    t: float,
    drive: Drive,
    extra_load: ExtraLoad | None = None,
) -> np.ndarray:
    """Electrostatic solve for ``phi0`` given the displacement at time t.

    Returns the full-length vector with exact zeros on constrained
    nodes. The free-block solve is refined to the package-wide relative
    residual tolerance.
    """
    u = system.check_u(u)
    phi0 = np.zeros(system.n_phi)
    free = system.dofmap.free_phi
    if len(free) == 0:
        return phi0
    rhs = (system.coupling_free().T @ u) - float(drive.phi_e(t)) * (
        system.g_unit[free]
    )
    if extra_load is not None:
        _, load_phi = extra_load(t)
        rhs = rhs - np.asarray(load_phi, dtype=float)[free]
    phi0[free] = system.kff_factor().solve(rhs)
    return phi0


class HHTStepper:
    """Precomputed factorizations and load shapes for fixed-step HHT."""

    def __init__(
        self,
        system: AssembledSystem,
        dt: float,
        params: HHTParams | None = None,
        drive: Drive | None = None,
        extra_load: ExtraLoad | None = None,
    ):
        if not dt > 0.0:
            raise InvalidScalar(f"dt must be > 0, got {dt!r}")
        self.system = system
        self.dt = float(dt)
        self.params = params or HHTParams()
        self.drive = drive or Drive.zero()
        self.extra_load = extra_load

        dm = system.dofmap
        free = dm.free_phi
        self._free = free
        n_u = system.n_u

        # Condensation: W = A Kff^-1 (dense), K_c = W A^T.
        if len(free):
            A = system.coupling_free().toarray()
            kff = system.kff_factor()
            self._W = self._solve_columns(kff, A)
            K_c = self._W @ A.T
            K_c = 0.5 * (K_c + K_c.T)
            self._g_free = system.g_unit[free]
            self._h = self._W @ self._g_free
        else:
            self._W = np.zeros((n_u, 0))
            K_c = np.zeros((n_u, n_u))
            self._g_free = np.zeros(0)
            self._h = np.zeros(n_u)
        self._K_c = K_c
        self.load_shape = system.f_unit + self._h

        a_h = self.params.alpha_h
        beta, gamma = self.params.beta_n, self.params.gamma_n
        self._c_blend = 1.0 + a_h
        self._coef_u = (0.5 - beta) * dt * dt
        self._coef_v = (1.0 - gamma) * dt
        self._bdt2 = beta * dt * dt
        self._gdt = gamma * dt

        S = (
            system.M.toarray()
            + self._c_blend * self._gdt * system.C_damp.toarray()
            + self._c_blend * self._bdt2 * (system.K_uu.toarray() + K_c)
        )
        S = 0.5 * (S + S.T)
        try:
            self._S_factor = cho_factor(S, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SolveFailure(
                f"effective step matrix is not positive definite: {exc}"
            ) from exc
        self._S = S

    @staticmethod
    def _solve_columns(factor, A: np.ndarray) -> np.ndarray:
        """W with rows n_u, columns n_free: W = (Kff^-1 A^T)^T."""
        out = np.empty((A.shape[0], A.shape[1]))
        for j in range(A.shape[0]):
            out[j] = factor.solve(A[j])
        return out

    # -- internal force and load helpers ---------------------------------

    def _kstar(self, u: np.ndarray) -> np.ndarray:
        return self.system.K_uu @ u + self._K_c @ u

    def load(self, t: float) -> np.ndarray:
        """Condensed external load at time *t*."""
        F = float(self.drive.phi_e(t)) * self.load_shape
        if self.extra_load is not None:
            load_u, load_phi = self.extra_load(t)
            F = F + np.asarray(load_u, dtype=float)
            if len(self._free):
                F = F + self._W @ np.asarray(load_phi, dtype=float)[self._free]
        return F

    def _solve_effective(self, rhs: np.ndarray) -> np.ndarray:
        x = cho_solve(self._S_factor, rhs)
        # One refinement sweep keeps the step solve at the package-wide
        # residual tolerance without measurable cost.
        residual = rhs - self._S @ x
        norm = float(np.linalg.norm(rhs))
        if norm > 0.0 and float(np.linalg.norm(residual)) > 1.0e-12 * norm:
            x = x + cho_solve(self._S_factor, residual)
        return x

    def initialize(self, u0: np.ndarray, u1: np.ndarray) -> State:
        """Consistent initial state from displacement and velocity data.

        The initial acceleration solves the momentum equation at t = 0
        with the initial electrostatic potential in place.
        """
        sys_ = self.system
        u0 = sys_.check_u(u0, "u0")
        u1 = sys_.check_u(u1, "u1")
        phi0 = solve_potential(sys_, u0, 0.0, self.drive, self.extra_load)
        rhs = (
            self.load_u_raw(0.0)
            - sys_.C_damp @ u1
            - sys_.K_uu @ u0
            - sys_.K_uphi @ phi0
        )
        a0 = sys_.m_factor().solve(rhs)
        state = State(t=0.0, u=u0.copy(), v=u1.copy(), a=a0, phi0=phi0)
        self._check_finite(state, -1)
        return state

    def load_u_raw(self, t: float) -> np.ndarray:
        """Uncondensed momentum load (no coupling feedback) at time t."""
        F = float(self.drive.phi_e(t)) * self.system.f_unit
        if self.extra_load is not None:
            load_u, _ = self.extra_load(t)
            F = F + np.asarray(load_u, dtype=float)
        return F

    def step(self, state: State) -> State:
        """Advance one step of size ``dt`` from *state*."""
        dt = self.dt
        sys_ = self.system
        t_new = state.t + dt
        t_alpha = state.t + self._c_blend * dt

        u_pred = state.u + dt * state.v + self._coef_u * state.a
        v_pred = state.v + self._coef_v * state.a

        f_old = sys_.C_damp @ state.v + self._kstar(state.u)
        f_pred = sys_.C_damp @ v_pred + self._kstar(u_pred)
        rhs = (
            self.load(t_alpha)
            - self._c_blend * f_pred
            + (self._c_blend - 1.0) * f_old
        )
        a_new = self._solve_effective(rhs)
        u_new = u_pred + self._bdt2 * a_new
        v_new = v_pred + self._gdt * a_new
        phi0 = solve_potential(sys_, u_new, t_new, self.drive, self.extra_load)
        new = State(t=t_new, u=u_new, v=v_new, a=a_new, phi0=phi0)
        self._check_finite(new, state.t)
        return new

    @staticmethod
    def _check_finite(state: State, t_prev: float) -> None:
        for name in ("u", "v", "a", "phi0"):
            vec = getattr(state, name)
            if not np.isfinite(vec).all():
                raise NonFiniteState(
                    f"non-finite {name} at t = {state.t!r} "
                    f"(previous step t = {t_prev!r})"
                )


def initialize(
    system: AssembledSystem,
    u0: np.ndarray,
    u1: np.ndarray,
    drive: Drive,
    extra_load: ExtraLoad | None = None,
) -> State:
    """Consistent initial state; see :meth:`HHTStepper.initialize`."""
    stepper = HHTStepper(
        system, dt=1.0, drive=drive, extra_load=extra_load
    )
    return stepper.initialize(u0, u1)


def hht_step(
    system: AssembledSystem,
    state: State,
    dt: float,
    params: HHTParams | None = None,
    drive: Drive | None = None,
    extra_load: ExtraLoad | None = None,
) -> State:
    """One HHT step as a standalone call.

    Builds a throwaway stepper; loops should construct an
    :class:`HHTStepper` (or use :func:`run`) to reuse factorizations.
    """
    stepper = HHTStepper(system, dt, params, drive, extra_load)
    return stepper.step(state)


@dataclass
class Trajectory:
    """A completed run: per-step energy report plus the final state.

    The originating inputs are kept so verification studies can replay
    the run with scaled or otherwise modified data.
    """

    times: np.ndarray
    report: EnergyReport
    final_state: State
    states: list[State] | None
    system: AssembledSystem
    drive: Drive
    u0: np.ndarray
    u1: np.ndarray
    dt: float
    params: HHTParams
    extra_load: ExtraLoad | None = field(default=None, repr=False)


def run(
    system: AssembledSystem,
    drive: Drive,
    u0: np.ndarray,
    u1: np.ndarray,
    dt: float,
    t_end: float,
    params: HHTParams | None = None,
    observers: Sequence[Callable[[int, State], None]] = (),
    extra_load: ExtraLoad | None = None,
    keep_states: bool = False,
) -> Trajectory:
    """Integrate from rest data ``(u0, u1)`` to ``t_end`` in fixed steps.

    ``dt`` must divide ``t_end`` to within round-off and stay above the
    degeneracy guard ``1e-15 * t_end``. Energies are sampled at every
    step; observers are called with ``(step_index, state)`` for each
    sampled state including the initial one.
    """
    if not t_end > 0.0:
        raise InvalidScalar(f"t_end must be > 0, got {t_end!r}")
    if not dt > 0.0:
        raise InvalidScalar(f"dt must be > 0, got {dt!r}")
    if dt <= 1.0e-15 * t_end:
        raise InvalidScalar(
            f"dt = {dt!r} is below the degeneracy guard for t_end = {t_end!r}"
        )
    n_steps = int(round(t_end / dt))
    if n_steps < 1 or abs(n_steps * dt - t_end) > 1.0e-9 * max(t_end, dt):
        raise InvalidScalar(
            f"dt = {dt!r} does not divide t_end = {t_end!r}"
        )

    params = params or HHTParams()
    stepper = HHTStepper(system, dt, params, drive, extra_load)
    tracker = EnergyTracker(system, drive)
    state = stepper.initialize(u0, u1)
    tracker.update(state)
    states = [state] if keep_states else None
    for obs in observers:
        obs(0, state)
    for k in range(1, n_steps + 1):
        state = stepper.step(state)
        tracker.update(state)
        if keep_states:
            states.append(state)
        for obs in observers:
            obs(k, state)

    report = tracker.report()
    return Trajectory(
        times=report.t.copy(),
        report=report,
        final_state=state,
        states=states,
        system=system,
        drive=drive,
        u0=np.asarray(u0, dtype=float).copy(),
        u1=np.asarray(u1, dtype=float).copy(),
        dt=float(dt),
        params=params,
        extra_load=extra_load,
    )
