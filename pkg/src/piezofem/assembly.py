"""Finite-element assembly of the coupled electromechanical operators.

Discretization: piecewise-linear simplicial elements for both the
displacement field and the electric potential. All element integrands
are constant (gradients of linears) or quadratic (products of two basis
functions), so assembly uses exact closed-form formulas; no numerical
quadrature enters the production path.

Assembled blocks, with ``v`` a displacement test function and ``w`` a
potential test function vanishing on the electrodes:

* ``M``        mass,               (rho u'', v)
* ``K_uu``     elastic stiffness,  (c_E B u, B v)
* ``C_damp``   Rayleigh damping,   alpha * M + beta * K_uu
* ``K_uphi``   coupling,           (e^T grad(phi), B v); its transpose
  drives the charge equation through (e B u, grad(w))
* ``K_phiphi`` dielectric,         (eps_S grad(phi), grad(w))

``B`` is the symmetric-gradient operator in Voigt order with shear rows
carrying the full sum of the two cross derivatives (no 1/2), matching
the material matrices in :mod:`piezofem.materials`.

The inhomogeneous electrode potential is removed by a lift: ``chi`` is
the discrete harmonic extension of the boundary values (1 on the driven
electrode, 0 on ground), and the drive enters the homogenized equations
only through the constant load shapes ``f_unit = -K_uphi @ chi`` and
``g_unit = K_phiphi @ chi`` scaled by the drive signal.

In 2D the mesh plane is the plane containing the poling axis: mesh
coordinate x is the first material axis and mesh coordinate y is the
poling axis. Plane-strain reduced material blocks are used.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .errors import DegenerateCell, DimensionMismatch, SingularLift
from .linalg import Factorized
from .materials import MaterialSet, reduce_2d
from .mesh import DofMap, Mesh, build_dofmap, _longest_edge, _signed_measure

__all__ = [
    "AssembledSystem",
    "element_matrices",
    "assemble",
    "build_dirichlet_lift",
    "replace_lift",
    "write_triplets",
    "cell_geometry",
]

_DEGENERATE_RTOL = 1.0e-14


def cell_geometry(mesh: Mesh, index: int):
    """Geometry of one cell: ``(volume, G)``.

    ``G`` has shape ``(dim, dim + 1)``; column ``j`` is the (constant)
    gradient of the barycentric basis function of local node ``j``.
    Raises :class:`DegenerateCell` when the cell measure is below the
    degeneracy floor relative to its longest edge.
    """
    points = mesh.nodes[mesh.cells[index]]
    vol = _signed_measure(points)
    h = _longest_edge(points)
    if abs(vol) <= _DEGENERATE_RTOL * h**mesh.dim:
        raise DegenerateCell(
            f"cell {index} has measure {vol:.3e} below the degeneracy "
            f"floor for edge length {h:.3e}"
        )
    edges = (points[1:] - points[0]).T        # (dim, dim), columns = edges
    einv = np.linalg.inv(edges)               # row j = grad of barycentric j+1
    G = np.empty((mesh.dim, mesh.dim + 1))
    G[:, 1:] = einv.T
    G[:, 0] = -G[:, 1:].sum(axis=1)
    return abs(vol), G


def strain_operator(G: np.ndarray) -> np.ndarray:
    """Voigt strain-displacement matrix for one cell.

    Columns follow node-major interleaved displacement DOFs. Shear rows
    are sums of cross derivatives (factor-2 convention).
    """
    dim, n_loc = G.shape
    if dim == 2:
        B = np.zeros((3, 2 * n_loc))
        for j in range(n_loc):
            gx, gy = G[0, j], G[1, j]
            B[0, 2 * j] = gx
            B[1, 2 * j + 1] = gy
            B[2, 2 * j] = gy
            B[2, 2 * j + 1] = gx
        return B
    B = np.zeros((6, 3 * n_loc))
    for j in range(n_loc):
        gx, gy, gz = G[0, j], G[1, j], G[2, j]
        B[0, 3 * j] = gx
        B[1, 3 * j + 1] = gy
        B[2, 3 * j + 2] = gz
        B[3, 3 * j + 1] = gz
        B[3, 3 * j + 2] = gy
        B[4, 3 * j] = gz
        B[4, 3 * j + 2] = gx
        B[5, 3 * j] = gy
        B[5, 3 * j + 1] = gx
    return B


def _material_blocks(mesh: Mesh, material: MaterialSet):
    if mesh.dim == 2:
        red = reduce_2d(material)
        return red.c, red.e, red.eps
    return material.c_E, material.e_coup, material.eps_S


def _element_blocks(vol, G, c, e, eps, rho):
    """Element matrices from raw constitutive blocks."""
    dim, n_loc = G.shape
    B = strain_operator(G)
    k_uu = vol * (B.T @ c @ B)
    k_uu = 0.5 * (k_uu + k_uu.T)
    k_uphi = vol * (B.T @ e.T @ G)
    k_phiphi = vol * (G.T @ eps @ G)
    k_phiphi = 0.5 * (k_phiphi + k_phiphi.T)
    # Consistent mass: integral of l_i * l_j = V * (1 + delta_ij) /
    # ((d + 1) * (d + 2)) for linear barycentric basis functions.
    scalar = (np.ones((n_loc, n_loc)) + np.eye(n_loc)) * (
        rho * vol / ((dim + 1) * (dim + 2))
    )
    m = np.kron(scalar, np.eye(dim))
    return m, k_uu, k_uphi, k_phiphi


def element_matrices(cell: int, mesh: Mesh, material: MaterialSet):
    """Element matrices ``(m_e, k_uu_e, k_uphi_e, k_phiphi_e)`` of one cell.

    Shapes for a cell with ``k = dim + 1`` nodes: ``(dim*k, dim*k)``,
    ``(dim*k, dim*k)``, ``(dim*k, k)``, ``(k, k)``. Displacement DOFs
    are node-major interleaved.
    """
    vol, G = cell_geometry(mesh, cell)
    c, e, eps = _material_blocks(mesh, material)
    return _element_blocks(vol, G, c, e, eps, material.rho)


@dataclass
class AssembledSystem:
    """Global operators, lift data, and DOF metadata for one problem.

    ``L_B`` and ``L_phi`` are the same stiffness patterns assembled with
    identity constitutive blocks (and unit density); they define the
    discrete strain and potential-gradient norms used by the energy and
    verification modules.
    """

    mesh: Mesh
    dofmap: DofMap
    material: MaterialSet
    M: csr_matrix
    K_uu: csr_matrix
    C_damp: csr_matrix
    K_uphi: csr_matrix
    K_phiphi: csr_matrix
    L_B: csr_matrix
    L_phi: csr_matrix
    chi: np.ndarray
    f_unit: np.ndarray
    g_unit: np.ndarray
    _kff: Factorized | None = field(default=None, repr=False)
    _m_factor: Factorized | None = field(default=None, repr=False)
    _coupling: csr_matrix | None = field(default=None, repr=False)

    @property
    def n_u(self) -> int:
        return self.dofmap.n_u

    @property
    def n_phi(self) -> int:
        return self.dofmap.n_phi

    @property
    def n_free_phi(self) -> int:
        return len(self.dofmap.free_phi)

    def kff_factor(self) -> Factorized | None:
        """Factor of the free-node dielectric block (None if empty)."""
        if self.n_free_phi == 0:
            return None
        if self._kff is None:
            free = self.dofmap.free_phi
            kff = self.K_phiphi[np.ix_(free, free)]
            self._kff = Factorized(kff, "K_phiphi free block", SingularLift)
        return self._kff

    def m_factor(self) -> Factorized:
        """Factor of the mass matrix."""
        if self._m_factor is None:
            self._m_factor = Factorized(self.M, "mass matrix")
        return self._m_factor

    def coupling_free(self) -> csr_matrix:
        """Columns of ``K_uphi`` restricted to free potential nodes."""
        if self._coupling is None:
            self._coupling = self.K_uphi[:, self.dofmap.free_phi].tocsr()
        return self._coupling

    def check_u(self, u: np.ndarray, name: str = "u") -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_u,):
            raise DimensionMismatch(
                f"{name} has shape {u.shape}, expected ({self.n_u},)"
            )
        return u


def assemble(
    mesh: Mesh,
    dofmap: DofMap | None = None,
    material: MaterialSet | None = None,
) -> AssembledSystem:
    """Assemble every global block and the electrode lift for *mesh*.

    Element contributions are accumulated as triplets in a fixed cell
    order and summed by conversion to CSR, so repeated assembly of the
    same inputs is bit-reproducible. Element matrices are symmetrized
    before scatter, making the global symmetric blocks exactly symmetric.
    """
    if material is None:
        raise TypeError("assemble() requires a material")
    if dofmap is None:
        dofmap = build_dofmap(mesh)
    if dofmap.n_phi != mesh.n_nodes or dofmap.n_u != mesh.dim * mesh.n_nodes:
        raise DimensionMismatch(
            f"dofmap sized for {dofmap.n_phi} nodes does not match mesh "
            f"with {mesh.n_nodes} nodes"
        )
    dim = mesh.dim
    n_loc = dim + 1
    c_blk, e_blk, eps_blk = _material_blocks(mesh, material)
    eye_c = np.eye(c_blk.shape[0])
    eye_eps = np.eye(dim)

    rows_uu, cols_uu = [], []
    vals_m, vals_k, vals_lb = [], [], []
    rows_up, cols_up, vals_up = [], [], []
    rows_pp, cols_pp = [], []
    vals_pp, vals_lp = [], []

    for index in range(mesh.n_cells):
        vol, G = cell_geometry(mesh, index)
        m_e, k_uu_e, k_uphi_e, k_pp_e = _element_blocks(
            vol, G, c_blk, e_blk, eps_blk, material.rho
        )
        _, lb_e, _, lp_e = _element_blocks(
            vol, G, eye_c, np.zeros_like(e_blk), eye_eps, 1.0
        )
        cell = mesh.cells[index]
        udofs = (dim * cell[:, None] + np.arange(dim)[None, :]).ravel()
        pdofs = cell

        iu = np.repeat(udofs, dim * n_loc)
        ju = np.tile(udofs, dim * n_loc)
        rows_uu.append(iu)
        cols_uu.append(ju)
        vals_m.append(m_e.ravel())
        vals_k.append(k_uu_e.ravel())
        vals_lb.append(lb_e.ravel())

        rows_up.append(np.repeat(udofs, n_loc))
        cols_up.append(np.tile(pdofs, dim * n_loc))
        vals_up.append(k_uphi_e.ravel())

        ip = np.repeat(pdofs, n_loc)
        jp = np.tile(pdofs, n_loc)
        rows_pp.append(ip)
        cols_pp.append(jp)
        vals_pp.append(k_pp_e.ravel())
        vals_lp.append(lp_e.ravel())

    def collect(rows, cols, vals, shape):
        mat = coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=shape,
        ).tocsr()
        mat.sum_duplicates()
        mat.sort_indices()
        return mat

    n_u, n_phi = dofmap.n_u, dofmap.n_phi
    M = collect(rows_uu, cols_uu, vals_m, (n_u, n_u))
    K_uu = collect(rows_uu, cols_uu, vals_k, (n_u, n_u))
    L_B = collect(rows_uu, cols_uu, vals_lb, (n_u, n_u))
    K_uphi = collect(rows_up, cols_up, vals_up, (n_u, n_phi))
    K_phiphi = collect(rows_pp, cols_pp, vals_pp, (n_phi, n_phi))
    L_phi = collect(rows_pp, cols_pp, vals_lp, (n_phi, n_phi))
    C_damp = (material.alpha * M + material.beta * K_uu).tocsr()

    system = AssembledSystem(
        mesh=mesh,
        dofmap=dofmap,
        material=material,
        M=M,
        K_uu=K_uu,
        C_damp=C_damp,
        K_uphi=K_uphi,
        K_phiphi=K_phiphi,
        L_B=L_B,
        L_phi=L_phi,
        chi=np.zeros(n_phi),
        f_unit=np.zeros(n_u),
        g_unit=np.zeros(n_phi),
    )
    chi, f_unit, g_unit = build_dirichlet_lift(system, mesh, dofmap)
    system.chi = chi
    system.f_unit = f_unit
    system.g_unit = g_unit
    return system


def build_dirichlet_lift(
    system: AssembledSystem, mesh: Mesh, dofmap: DofMap
):
    """Discrete harmonic lift of the electrode boundary values.

    ``chi`` equals 1 on driven-electrode nodes, 0 on ground nodes, and
    extends into the interior by solving the dielectric operator on the
    free nodes (zero rows of ``K_phiphi @ chi`` there). Returns
    ``(chi, f_unit, g_unit)`` with the load shapes defined in the module
    docstring.
    """
    chi = np.zeros(dofmap.n_phi)
    chi[dofmap.electrode_nodes] = 1.0
    free = dofmap.free_phi
    if len(free):
        constrained = dofmap.constrained_phi
        k_fc = system.K_phiphi[np.ix_(free, constrained)]
        rhs = -k_fc @ chi[constrained]
        chi[free] = system.kff_factor().solve(rhs)
    f_unit = -(system.K_uphi @ chi)
    g_unit = system.K_phiphi @ chi
    return chi, f_unit, g_unit


def replace_lift(system: AssembledSystem, chi: np.ndarray) -> AssembledSystem:
    """Rebuild the system around an alternative lift vector.

    The replacement must carry the same boundary trace (1 on electrode
    nodes, 0 on ground nodes); only the interior extension may differ.
    Used by the lift-independence study.
    """
    chi = np.asarray(chi, dtype=float)
    if chi.shape != (system.n_phi,):
        raise DimensionMismatch(
            f"lift has shape {chi.shape}, expected ({system.n_phi},)"
        )
    dm = system.dofmap
    if not np.array_equal(chi[dm.electrode_nodes],
                          np.ones(len(dm.electrode_nodes))):
        raise DimensionMismatch("lift trace on electrode nodes is not 1")
    if not np.array_equal(chi[dm.ground_nodes],
                          np.zeros(len(dm.ground_nodes))):
        raise DimensionMismatch("lift trace on ground nodes is not 0")
    return replace(
        system,
        chi=chi.copy(),
        f_unit=-(system.K_uphi @ chi),
        g_unit=system.K_phiphi @ chi,
        _kff=system._kff,
        _m_factor=system._m_factor,
    )


def write_triplets(matrix, path) -> None:
    """Dump a sparse block as sorted ``row col value`` text lines."""
    coo = coo_matrix(matrix)
    coo.sum_duplicates()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} {repr(float(coo.data[k]))}\n")
