import numpy as np
import pytest
from scipy.sparse import csr_matrix

from piezofem.assembly import AssembledSystem
from piezofem.materials import build_material
from piezofem.mesh import DofMap, generate_rect
from piezofem.verify import unit_scale_material


@pytest.fixture(scope="session")
def unit_material():
    return unit_scale_material(alpha=0.2, beta=0.02)


@pytest.fixture(scope="session")
def unit_system(unit_material):
    from piezofem.assembly import assemble

    return assemble(generate_rect(2, 2), material=unit_material)


def make_toy_system(masses, stiffnesses, alpha=0.0, beta=0.0):
    """Diagonal mass/stiffness system with no potential unknowns.

    Lets the stepper run on problems with closed-form solutions
    (e.g. independent harmonic oscillators) without a mesh behind them.
    """
    m = np.atleast_1d(np.asarray(masses, dtype=float))
    k = np.atleast_1d(np.asarray(stiffnesses, dtype=float))
    n = len(m)
    assert len(k) == n
    M = csr_matrix(np.diag(m))
    K = csr_matrix(np.diag(k))
    empty_mat = csr_matrix((n, 0))
    empty_sq = csr_matrix((0, 0))
    ints = np.array([], dtype=int)
    material = build_material(
        c11=4.0, c12=1.5, c13=1.2, c33=3.5, c44=1.0,
        e13=0.0, e15=0.0, e33=0.0, eps11=1.0, eps33=1.0,
        rho=1.0, alpha=alpha, beta=beta,
    )
    return AssembledSystem(
        mesh=None,
        dofmap=DofMap(
            n_u=n, n_phi=0, constrained_phi=ints, free_phi=ints,
            electrode_nodes=ints, ground_nodes=ints,
        ),
        material=material,
        M=M,
        K_uu=K,
        C_damp=csr_matrix(alpha * M + beta * K),
        K_uphi=empty_mat,
        K_phiphi=empty_sq,
        L_B=K,
        L_phi=empty_sq,
        chi=np.zeros(0),
        f_unit=np.zeros(n),
        g_unit=np.zeros(0),
    )


@pytest.fixture
def toy_oscillator():
    # unit mass, unit stiffness: u(t) = cos(t) for u0 = 1, v0 = 0
    return make_toy_system([1.0], [1.0])
