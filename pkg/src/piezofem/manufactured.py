"""Manufactured-solution studies for the coupled solver.

A manufactured case prescribes smooth closed-form fields ``u*(x, y, t)``
and ``phi*(x, y, t)`` on the unit square, derives the volume sources,
boundary tractions, and boundary charge flux that make them an exact
solution of the damped piezoelectric system, and feeds those to the
production solver through its extra-load hook. Comparing the discrete
solution against the closed form then measures the full discretization
error with nothing mocked out.

The manufactured potential must respect the electrode structure of the
generated mesh (driven top edge, grounded bottom edge): its trace is 0
at ``y = 0`` and equals the drive signal at ``y = 1``, uniformly in x.

Source derivation is symbolic (sympy) and the load and error integrals
use fixed simplex and edge quadrature rules exact for every polynomial
integrand occurring in the shipped cases, so quadrature never limits
the observed convergence rates. None of this machinery touches the
production assembly path, which stays on exact closed-form element
integrals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import assemble
from .errors import ConfigError, RateFailure
from .materials import MaterialSet, reduce_2d
from .mesh import REMAINING, Mesh, build_dofmap, generate_rect
from .timeint import Drive, HHTParams, Trajectory, run

__all__ = [
    "MMSCase",
    "MMSLoads",
    "LevelResult",
    "MMSReport",
    "build_case",
    "run_level",
    "manufactured_convergence",
]

# Dunavant simplex rule, degree 6, 12 points: barycentric abscissae and
# weights normalized to sum to one.
_TRI_A1, _TRI_W1 = 0.249286745170910, 0.116786275726379
_TRI_A2, _TRI_W2 = 0.063089014491502, 0.050844906370207
_TRI_B1, _TRI_B2, _TRI_B3 = (
    0.310352451033785,
    0.636502499121399,
    0.053145049844816,
)
_TRI_W3 = 0.082851075618374


def _triangle_rule():
    points = []
    weights = []
    for a, w in ((_TRI_A1, _TRI_W1), (_TRI_A2, _TRI_W2)):
        b = 1.0 - 2.0 * a
        for bary in ((a, a, b), (a, b, a), (b, a, a)):
            points.append(bary)
            weights.append(w)
    perms = {
        (_TRI_B1, _TRI_B2, _TRI_B3),
        (_TRI_B1, _TRI_B3, _TRI_B2),
        (_TRI_B2, _TRI_B1, _TRI_B3),
        (_TRI_B2, _TRI_B3, _TRI_B1),
        (_TRI_B3, _TRI_B1, _TRI_B2),
        (_TRI_B3, _TRI_B2, _TRI_B1),
    }
    for bary in sorted(perms):
        points.append(bary)
        weights.append(_TRI_W3)
    return np.array(points), np.array(weights)


_TRI_BARY, _TRI_WEIGHTS = _triangle_rule()

# Gauss rule on [0, 1], 3 points, exact through degree 5.
_EDGE_S = 0.5 * (1.0 + np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)]))
_EDGE_W = 0.5 * np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])


@dataclass
class MMSCase:
    """Closed-form fields plus every derived source of one study case."""

    name: str
    drive: Drive
    material: MaterialSet
    u_fn: Callable        # (x, y, t) -> (2, ...) displacement
    v_fn: Callable        # time derivative of u_fn
    phi_fn: Callable      # (x, y, t) -> (...)  potential
    b_fn: Callable        # volume force density, (2, ...)
    q_fn: Callable        # volume charge density, (...)
    traction_fn: Callable  # (x, y, t, nx, ny) -> (2, ...)
    flux_fn: Callable      # (x, y, t, nx, ny) -> (...)
    expect_exact: bool     # discretization reproduces the fields exactly


def build_case(
    material: MaterialSet, kind: str = "quadratic"
) -> MMSCase:
    """Symbolically derive an :class:`MMSCase` on the unit square.

    Kinds:

    * ``constant``: rigid offset, zero potential, zero drive. Every
      source vanishes; the solver must reproduce it to round-off.
    * ``affine``: affine-in-space displacement with a linear time
      profile and the linear potential ``phi = y`` under a unit drive.
      Strains and fluxes are spatially constant, so linear elements and
      the alpha-blend of linear loads are both exact.
    * ``quadratic``: quadratic-in-space displacement with sinusoidal
      time profiles and a curved potential; the generic second-order
      convergence case.
    """
    import sympy as sp

    x, y, t = sp.symbols("x y t")
    if kind == "constant":
        ux = sp.Float(0.3)
        uy = sp.Float(-0.2)
        phi = sp.Integer(0)
        drive = Drive.zero()
        exact = True
    elif kind == "affine":
        profile = 1 + sp.Rational(1, 2) * t
        ux = (sp.Rational(1, 10) + sp.Rational(2, 5) * x
              - sp.Rational(3, 10) * y) * profile
        uy = (-sp.Rational(1, 5) + sp.Rational(1, 4) * x
              + sp.Rational(7, 20) * y) * profile
        phi = y
        drive = Drive.constant(1.0)
        exact = True
    elif kind == "quadratic":
        ux = sp.sin(3 * t + sp.Rational(3, 10)) * (
            sp.Rational(1, 4) + x / 10 + y / 5
            + sp.Rational(3, 10) * x**2 + sp.Rational(3, 20) * x * y
            + sp.Rational(1, 5) * y**2
        )
        uy = sp.sin(sp.Rational(12, 5) * t + sp.Rational(7, 10)) * (
            sp.Rational(3, 20) - x / 5 + y / 10
            + sp.Rational(1, 4) * x**2 - x * y / 10
            + sp.Rational(3, 10) * y**2
        )
        phi = y**2 + sp.Rational(1, 2) * x * y * (1 - y)
        drive = Drive.constant(1.0)
        exact = False
    else:
        raise ConfigError(f"unknown manufactured case kind {kind!r}")

    red = reduce_2d(material)
    c = sp.Matrix(red.c.tolist())
    e = sp.Matrix(red.e.tolist())
    eps = sp.Matrix(red.eps.tolist())
    rho, alpha, beta = material.rho, material.alpha, material.beta

    u = sp.Matrix([ux, uy])
    S = sp.Matrix([
        sp.diff(ux, x),
        sp.diff(uy, y),
        sp.diff(ux, y) + sp.diff(uy, x),
    ])
    gphi = sp.Matrix([sp.diff(phi, x), sp.diff(phi, y)])
    sigma = c * S + beta * c * sp.diff(S, t) + e.T * gphi
    div_sigma = sp.Matrix([
        sp.diff(sigma[0], x) + sp.diff(sigma[2], y),
        sp.diff(sigma[1], y) + sp.diff(sigma[2], x),
    ])
    b = rho * sp.diff(u, t, 2) + alpha * rho * sp.diff(u, t) - div_sigma
    D = e * S - eps * gphi
    q = -(sp.diff(D[0], x) + sp.diff(D[1], y))

    nx, ny = sp.symbols("n_x n_y")
    traction = sp.Matrix([
        nx * sigma[0] + ny * sigma[2],
        ny * sigma[1] + nx * sigma[2],
    ])
    flux = nx * D[0] + ny * D[1]

    def lam(expr):
        return sp.lambdify((x, y, t), expr, modules="numpy")

    def lam_n(expr):
        return sp.lambdify((x, y, t, nx, ny), expr, modules="numpy")

    fx, fy = lam(ux), lam(uy)
    vx, vy = lam(sp.diff(ux, t)), lam(sp.diff(uy, t))
    bx, by = lam(b[0]), lam(b[1])
    fq = lam(q)
    fphi = lam(phi)
    ftx, fty = lam_n(traction[0]), lam_n(traction[1])
    fflux = lam_n(flux)

    def pair(f1, f2):
        def call(x_, y_, t_):
            sh = np.shape(x_)
            a1 = np.broadcast_to(np.asarray(f1(x_, y_, t_), float), sh)
            a2 = np.broadcast_to(np.asarray(f2(x_, y_, t_), float), sh)
            return np.stack([a1, a2])
        return call

    def pair_n(f1, f2):
        def call(x_, y_, t_, nx_, ny_):
            sh = np.shape(x_)
            a1 = np.broadcast_to(
                np.asarray(f1(x_, y_, t_, nx_, ny_), float), sh
            )
            a2 = np.broadcast_to(
                np.asarray(f2(x_, y_, t_, nx_, ny_), float), sh
            )
            return np.stack([a1, a2])
        return call

    def scalar(f):
        def call(x_, y_, t_):
            return np.broadcast_to(
                np.asarray(f(x_, y_, t_), float), np.shape(x_)
            )
        return call

    def scalar_n(f):
        def call(x_, y_, t_, nx_, ny_):
            return np.broadcast_to(
                np.asarray(f(x_, y_, t_, nx_, ny_), float), np.shape(x_)
            )
        return call

    return MMSCase(
        name=kind,
        drive=drive,
        material=material,
        u_fn=pair(fx, fy),
        v_fn=pair(vx, vy),
        phi_fn=scalar(fphi),
        b_fn=pair(bx, by),
        q_fn=scalar(fq),
        traction_fn=pair_n(ftx, fty),
        flux_fn=scalar_n(fflux),
        expect_exact=exact,
    )


class MMSLoads:
    """Extra-load provider assembling the manufactured sources.

    Volume sources integrate against the linear basis on every cell;
    boundary tractions integrate on every boundary facet and the charge
    flux only on charge-free (``remaining``) facets, since potential
    test functions vanish on the electrodes. Returns the pair
    ``(load_u, load_phi)`` consumed by the time integrator.
    """

    def __init__(self, mesh: Mesh, case: MMSCase):
        self.mesh = mesh
        self.case = case
        cells = mesh.cells
        pts = mesh.nodes[cells]                      # (nc, 3, 2)
        vols = np.abs(
            0.5 * np.linalg.det(pts[:, 1:] - pts[:, :1])
        )
        # physical quadrature points: X[c, k] = sum_j bary[k, j] p_cj
        self._qx = np.einsum("kj,cjd->ckd", _TRI_BARY, pts)
        self._qw = vols[:, None] * _TRI_WEIGHTS[None, :]
        self._cells = cells

        # boundary facet data: endpoints, outward normal, parent cell
        parents: dict[frozenset, int | None] = {}
        for ci, cell in enumerate(cells):
            for drop in range(3):
                face = frozenset(
                    int(cell[i]) for i in range(3) if i != drop
                )
                parents[face] = ci if face not in parents else None
        edges = []
        for facet, tag in zip(mesh.facets, mesh.facet_tags):
            n0, n1 = int(facet[0]), int(facet[1])
            p0, p1 = mesh.nodes[n0], mesh.nodes[n1]
            vec = p1 - p0
            length = float(np.linalg.norm(vec))
            normal = np.array([vec[1], -vec[0]]) / length
            parent = parents[frozenset((n0, n1))]
            centroid = mesh.nodes[cells[parent]].mean(axis=0)
            mid = 0.5 * (p0 + p1)
            if normal @ (centroid - mid) > 0.0:
                normal = -normal
            edges.append((n0, n1, p0, p1, length, normal, tag))
        self._edges = edges

    def __call__(self, t: float):
        mesh, case = self.mesh, self.case
        load_u = np.zeros(2 * mesh.n_nodes)
        load_phi = np.zeros(mesh.n_nodes)

        X = self._qx[..., 0]
        Y = self._qx[..., 1]
        b = case.b_fn(X, Y, t)                       # (2, nc, nq)
        q = case.q_fn(X, Y, t)                       # (nc, nq)
        for comp in range(2):
            contrib = (b[comp] * self._qw) @ _TRI_BARY   # (nc, 3)
            np.add.at(
                load_u, (2 * self._cells).ravel() + comp, contrib.ravel()
            )
        contrib = (q * self._qw) @ _TRI_BARY
        np.add.at(load_phi, self._cells.ravel(), contrib.ravel())

        for n0, n1, p0, p1, length, normal, tag in self._edges:
            xs = p0[0] + (p1[0] - p0[0]) * _EDGE_S
            ys = p0[1] + (p1[1] - p0[1]) * _EDGE_S
            w = length * _EDGE_W
            tr = case.traction_fn(xs, ys, t, normal[0], normal[1])
            for comp in range(2):
                load_u[2 * n0 + comp] += float(
                    np.sum(w * tr[comp] * (1.0 - _EDGE_S))
                )
                load_u[2 * n1 + comp] += float(
                    np.sum(w * tr[comp] * _EDGE_S)
                )
            if tag == REMAINING:
                fl = case.flux_fn(xs, ys, t, normal[0], normal[1])
                load_phi[n0] += float(np.sum(w * fl * (1.0 - _EDGE_S)))
                load_phi[n1] += float(np.sum(w * fl * _EDGE_S))
        return load_u, load_phi


def _interpolate(mesh: Mesh, fn, t: float) -> np.ndarray:
    """Nodal interpolant of a 2-component field, interleaved DOFs."""
    values = fn(mesh.nodes[:, 0], mesh.nodes[:, 1], t)
    out = np.empty(2 * mesh.n_nodes)
    out[0::2] = values[0]
    out[1::2] = values[1]
    return out


def _l2_errors(
    loads: MMSLoads, u_nodal: np.ndarray, phi_nodal: np.ndarray, t: float
):
    """Quadrature L2 errors of displacement and full potential."""
    mesh, case = loads.mesh, loads.case
    cells = loads._cells
    X, Y = loads._qx[..., 0], loads._qx[..., 1]
    exact_u = case.u_fn(X, Y, t)
    exact_phi = case.phi_fn(X, Y, t)

    err_u_sq = 0.0
    for comp in range(2):
        nodal = u_nodal[comp::2]
        approx = np.einsum("cj,kj->ck", nodal[cells], _TRI_BARY)
        err_u_sq += float(np.sum(loads._qw * (approx - exact_u[comp]) ** 2))
    approx_phi = np.einsum("cj,kj->ck", phi_nodal[cells], _TRI_BARY)
    err_phi_sq = float(np.sum(loads._qw * (approx_phi - exact_phi) ** 2))
    return np.sqrt(err_u_sq), np.sqrt(err_phi_sq)


@dataclass
class LevelResult:
    """One mesh level of a manufactured study."""

    n: int
    h: float
    dt: float
    err_u: float
    err_phi: float
    trajectory: Trajectory


@dataclass
class MMSReport:
    """Observed errors and fitted convergence rates of one study."""

    case: str
    levels: list[LevelResult]
    rate_u: float | None
    rate_phi: float | None

    def as_dict(self) -> dict:
        return {
            "case": self.case,
            "h": [lv.h for lv in self.levels],
            "dt": [lv.dt for lv in self.levels],
            "err_u": [lv.err_u for lv in self.levels],
            "err_phi": [lv.err_phi for lv in self.levels],
            "rate_u": self.rate_u,
            "rate_phi": self.rate_phi,
        }


def run_level(
    case: MMSCase,
    n: int,
    dt: float,
    t_end: float,
    params: HHTParams | None = None,
) -> LevelResult:
    """Solve one manufactured problem on an n-by-n unit-square mesh."""
    mesh = generate_rect(n, n, 1.0, 1.0)
    dofmap = build_dofmap(mesh)
    system = assemble(mesh, dofmap, case.material)
    loads = MMSLoads(mesh, case)
    u0 = _interpolate(mesh, case.u_fn, 0.0)
    u1 = _interpolate(mesh, case.v_fn, 0.0)
    traj = run(
        system, case.drive, u0, u1, dt, t_end,
        params=params, extra_load=loads,
    )
    phi_full = traj.final_state.phi0 + float(
        case.drive.phi_e(t_end)
    ) * system.chi
    err_u, err_phi = _l2_errors(loads, traj.final_state.u, phi_full, t_end)
    h = np.sqrt(2.0) / n      # longest edge of the structured mesh
    return LevelResult(
        n=n, h=h, dt=dt, err_u=err_u, err_phi=err_phi, trajectory=traj
    )


def manufactured_convergence(
    material: MaterialSet,
    levels=(4, 8, 16),
    dt0: float = 5.0e-3,
    t_end: float = 0.3,
    kind: str = "quadratic",
    params: HHTParams | None = None,
    rate_floor: float | None = 1.7,
) -> MMSReport:
    """Mesh refinement study with dt proportional to h.

    The fitted least-squares slopes of log error against log h are the
    observed rates; for rate-bearing cases a displacement or potential
    rate below *rate_floor* raises :class:`RateFailure`. Pass
    ``rate_floor=None`` to collect the report without enforcement.
    """
    case = build_case(material, kind)
    results = [
        run_level(case, n, dt0 * levels[0] / n, t_end, params)
        for n in levels
    ]
    rate_u = rate_phi = None
    if not case.expect_exact:
        log_h = np.log([lv.h for lv in results])
        rate_u = float(np.polyfit(log_h, np.log([lv.err_u
                                                 for lv in results]), 1)[0])
        rate_phi = float(np.polyfit(log_h, np.log([lv.err_phi
                                                   for lv in results]), 1)[0])
        for label, rate in (("displacement", rate_u), ("potential", rate_phi)):
            if rate_floor is not None and rate < rate_floor:
                raise RateFailure(
                    f"observed {label} convergence rate {rate:.3f} is "
                    f"below the floor {rate_floor}"
                )
    return MMSReport(
        case=kind, levels=results, rate_u=rate_u, rate_phi=rate_phi
    )
