"""Material parameter handling for transversely isotropic piezoelectric solids.

A material is described by ten independent constants plus mass density and
the two Rayleigh damping coefficients:

* elastic (stiffness at constant electric field, Voigt 6x6):
  ``c11, c12, c13, c33, c44`` with the dependent shear entry
  ``c66 = (c11 - c12) / 2``,
* piezoelectric stress coupling (3x6): ``e13, e15, e33``,
* dielectric permittivity at constant strain (3x3 diagonal):
  ``eps11, eps33``.

The crystal axis of symmetry (poling axis) is the third coordinate axis.
Voigt component order is ``(xx, yy, zz, yz, xz, xy)``; shear strain rows
carry the full sum of the two cross derivatives (no 1/2 factor), so the
matrices here must be paired with the matching strain operator.

Both quadratic-form matrices are required to be symmetric positive
definite; the smallest eigenvalue of each is computed at construction and
kept on the material as a validation certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidScalar, NonPositiveDefinite

__all__ = [
    "MaterialSet",
    "Reduced2D",
    "build_material",
    "smallest_eigenvalues",
    "reduce_2d",
    "PZT4_LIKE",
]

# Relative floor for the positive-definiteness check: the smallest
# eigenvalue must exceed this fraction of the largest matrix entry.
_PD_RTOL = 1.0e-12

# Typical soft-PZT ceramic constants (SI units). These are stand-in
# handbook values for a PZT-4 style ceramic, not measured data; any real
# study should substitute its own characterization.
PZT4_LIKE = {
    "c11": 139.0e9,
    "c12": 77.8e9,
    "c13": 74.3e9,
    "c33": 115.0e9,
    "c44": 25.6e9,
    "e13": -5.2,
    "e15": 12.7,
    "e33": 15.1,
    "eps11": 6.45e-9,
    "eps33": 5.62e-9,
    "rho": 7500.0,
}


@dataclass(frozen=True)
class MaterialSet:
    """Validated material data shared by assembly and verification.

    Attributes
    ----------
    rho : float
        Mass density, strictly positive.
    alpha : float
        Mass-proportional Rayleigh damping coefficient, >= 0.
    beta : float
        Stiffness-proportional Rayleigh damping coefficient, >= 0.
    c_E : ndarray, shape (6, 6)
        Elastic stiffness at constant electric field.
    e_coup : ndarray, shape (3, 6)
        Piezoelectric stress coupling.
    eps_S : ndarray, shape (3, 3)
        Permittivity at constant strain.
    lambda_mech, lambda_elec : float
        Smallest eigenvalues of ``c_E`` and ``eps_S`` (both positive);
        the coercivity certificate carried into the verification checks.
    """

    rho: float
    alpha: float
    beta: float
    c_E: np.ndarray
    e_coup: np.ndarray
    eps_S: np.ndarray
    lambda_mech: float
    lambda_elec: float

    def __post_init__(self):
        self.c_E.setflags(write=False)
        self.e_coup.setflags(write=False)
        self.eps_S.setflags(write=False)

    @property
    def lambda_mech_max(self) -> float:
        """Largest eigenvalue of ``c_E``."""
        return float(np.linalg.eigvalsh(self.c_E)[-1])

    @property
    def lambda_elec_max(self) -> float:
        """Largest eigenvalue of ``eps_S``."""
        return float(np.linalg.eigvalsh(self.eps_S)[-1])


@dataclass(frozen=True)
class Reduced2D:
    """Plane-strain reduction of a material to the x-z plane.

    The plane contains the poling axis; the in-plane displacement
    components are (x, z) and the reduced Voigt strain order is
    ``(xx, zz, xz)``.
    """

    c: np.ndarray      # (3, 3) elastic block
    e: np.ndarray      # (2, 3) coupling block
    eps: np.ndarray    # (2, 2) dielectric block

    def __post_init__(self):
        self.c.setflags(write=False)
        self.e.setflags(write=False)
        self.eps.setflags(write=False)


def _check_scalar(name: str, value: float, positive: bool) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise InvalidScalar(f"{name} must be finite, got {value!r}")
    if positive and value <= 0.0:
        raise InvalidScalar(f"{name} must be > 0, got {value!r}")
    if not positive and value < 0.0:
        raise InvalidScalar(f"{name} must be >= 0, got {value!r}")
    return value


def _check_spd(name: str, matrix: np.ndarray) -> float:
    """Return the smallest eigenvalue; raise if not safely positive."""
    eigs = np.linalg.eigvalsh(matrix)
    floor = _PD_RTOL * float(np.abs(matrix).max())
    if eigs[0] <= floor:
        raise NonPositiveDefinite(
            f"{name} is not positive definite: smallest eigenvalue "
            f"{eigs[0]:.6e} is below the floor {floor:.6e}"
        )
    return float(eigs[0])


def build_material(
    c11: float,
    c12: float,
    c13: float,
    c33: float,
    c44: float,
    e13: float,
    e15: float,
    e33: float,
    eps11: float,
    eps33: float,
    rho: float,
    alpha: float = 0.0,
    beta: float = 0.0,
) -> MaterialSet:
    """Assemble and validate a :class:`MaterialSet` from its constants.

    Parameters are the independent entries listed in the module docstring
    plus density and Rayleigh damping. Raises :class:`InvalidScalar` for a
    bad scalar and :class:`NonPositiveDefinite` if either quadratic-form
    matrix fails its eigenvalue check.
    """
    rho = _check_scalar("rho", rho, positive=True)
    alpha = _check_scalar("alpha", alpha, positive=False)
    beta = _check_scalar("beta", beta, positive=False)
    for name, value in (
        ("c11", c11), ("c12", c12), ("c13", c13), ("c33", c33),
        ("c44", c44), ("e13", e13), ("e15", e15), ("e33", e33),
        ("eps11", eps11), ("eps33", eps33),
    ):
        if not np.isfinite(float(value)):
            raise InvalidScalar(f"{name} must be finite, got {value!r}")

    c66 = 0.5 * (c11 - c12)
    c_E = np.array([
        [c11, c12, c13, 0.0, 0.0, 0.0],
        [c12, c11, c13, 0.0, 0.0, 0.0],
        [c13, c13, c33, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, c44, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, c44, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, c66],
    ], dtype=float)
    e_coup = np.array([
        [0.0, 0.0, 0.0, 0.0, e15, 0.0],
        [0.0, 0.0, 0.0, e15, 0.0, 0.0],
        [e13, e13, e33, 0.0, 0.0, 0.0],
    ], dtype=float)
    eps_S = np.diag([eps11, eps11, eps33]).astype(float)

    lambda_mech = _check_spd("c_E", c_E)
    lambda_elec = _check_spd("eps_S", eps_S)

    return MaterialSet(
        rho=rho,
        alpha=alpha,
        beta=beta,
        c_E=c_E,
        e_coup=e_coup,
        eps_S=eps_S,
        lambda_mech=lambda_mech,
        lambda_elec=lambda_elec,
    )


def smallest_eigenvalues(material: MaterialSet) -> tuple[float, float]:
    """Return ``(lambda_mech, lambda_elec)`` for *material*.

    These are the certificates computed at construction time; both are
    strictly positive for any material that passed validation.
    """
    return material.lambda_mech, material.lambda_elec


def reduce_2d(material: MaterialSet) -> Reduced2D:
    """Reduce a material to plane strain in the x-z plane.

    Rows and columns ``(1, 3, 5)`` of the Voigt system (1-based) survive:
    normal strains along both in-plane axes and the in-plane shear. The
    electric field keeps its components along the same two axes. Because
    the reduced blocks are principal submatrices, positive definiteness
    is inherited from the parent matrices (eigenvalue interlacing); it is
    still re-checked defensively.
    """
    idx_v = np.array([0, 2, 4])   # Voigt components xx, zz, xz
    idx_d = np.array([0, 2])      # spatial axes x, z
    c = material.c_E[np.ix_(idx_v, idx_v)].copy()
    e = material.e_coup[np.ix_(idx_d, idx_v)].copy()
    eps = material.eps_S[np.ix_(idx_d, idx_d)].copy()
    _check_spd("reduced c", c)
    _check_spd("reduced eps", eps)
    return Reduced2D(c=c, e=e, eps=eps)
