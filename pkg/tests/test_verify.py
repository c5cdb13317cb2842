import dataclasses

import numpy as np
import pytest

from piezofem.assembly import assemble
from piezofem.errors import (
    CoercivityViolation,
    PreconditionViolated,
    TooLarge,
)
from piezofem.materials import PZT4_LIKE, build_material
from piezofem.mesh import generate_rect
from piezofem.timeint import Drive, run
from piezofem.verify import (
    check_apriori_bound,
    check_coercivity,
    check_lift_independence,
    check_zero_data,
    dense_oracle,
    indicator_lift,
    monitor_regularity,
    static_potential_check,
    terminal_difference,
    unit_scale_material,
)

from conftest import make_toy_system


@pytest.fixture(scope="module")
def pulse():
    return Drive.trapezoid(amplitude=0.8, t_rise=0.3, t_hold=0.4,
                           t_fall=0.3)


def test_unit_scale_material_certificates():
    # The 6x6 stiffness is block diagonal: the 3x3 normal block has
    # smallest eigenvalue 2.53 (quadratic in the (1,1,c) subspace), so
    # the shear entry c44 = 1 is the global minimum; likewise eps33.
    mat = unit_scale_material()
    assert mat.lambda_mech == pytest.approx(1.0, abs=1e-13)
    assert mat.lambda_elec == pytest.approx(0.8, abs=1e-13)


def test_oracle_reproduces_closed_form():
    # Undamped oscillator with k = 4: u(t) = cos(2t).
    system = make_toy_system([1.0], [4.0])
    orc = dense_oracle(system, Drive.zero(), np.array([1.0]),
                       np.array([0.0]), t_end=1.0, n_samples=101)
    assert orc.u[-1, 0] == pytest.approx(np.cos(2.0), abs=1e-8)
    assert orc.v[-1, 0] == pytest.approx(-2.0 * np.sin(2.0), abs=1e-7)


def test_oracle_rejects_large_systems():
    system = assemble(
        generate_rect(4, 4),
        material=build_material(alpha=100.0, beta=1e-5, **PZT4_LIKE),
    )
    # 50 displacement + 15 free potential unknowns = 65 > 64
    with pytest.raises(TooLarge):
        dense_oracle(system, Drive.zero(), np.zeros(50), np.zeros(50),
                     t_end=1.0)


def test_terminal_difference_zero_for_same_run(unit_system, pulse):
    zeros = np.zeros(unit_system.n_u)
    orc = dense_oracle(unit_system, pulse, zeros, zeros, t_end=0.5,
                       n_samples=101)
    traj = run(unit_system, pulse, zeros, zeros, dt=1e-3, t_end=0.5)
    diff = terminal_difference(orc, traj)
    assert 0.0 < diff < 1e-4


def test_scaling_study_is_exact(unit_system, pulse):
    zeros = np.zeros(unit_system.n_u)
    base = run(unit_system, pulse, zeros, zeros, dt=5e-3, t_end=1.5)
    rep = check_apriori_bound(base, scale_factors=(1e-3, 1.0, 2.0, 1e3))
    assert rep.max_rel_deviation <= 1e-12
    consts = np.asarray(rep.stability_constants)
    assert np.allclose(consts, consts[0], rtol=1e-10)


def test_scaling_study_rejects_extra_loads(unit_system, pulse):
    zeros = np.zeros(unit_system.n_u)
    extra = lambda t: (np.zeros(unit_system.n_u),
                       np.zeros(unit_system.n_phi))
    base = run(unit_system, pulse, zeros, zeros, dt=5e-3, t_end=0.1,
               extra_load=extra)
    with pytest.raises(PreconditionViolated):
        check_apriori_bound(base)


def test_coercivity_margins_positive(unit_system):
    rep = check_coercivity(unit_system, n_vectors=100, seed=20250817)
    assert rep.min_margin_mech > 0.0
    assert rep.min_margin_elec > 0.0


def test_coercivity_violation_detected(unit_system):
    # Forge an impossible certificate: a claimed smallest eigenvalue far
    # above the true one must trip the Rayleigh-quotient check.
    forged = dataclasses.replace(unit_system.material, lambda_mech=50.0)
    bad_system = dataclasses.replace(unit_system, material=forged)
    with pytest.raises(CoercivityViolation):
        check_coercivity(bad_system, n_vectors=10)


def test_lift_independence(unit_material, pulse):
    rep = check_lift_independence(
        generate_rect(2, 2), unit_material, pulse, dt=5e-3, t_end=1.0
    )
    assert rep.max_rel_u <= 1e-10
    assert rep.max_rel_phi <= 1e-10
    # the condensed load shape itself must also agree across lifts
    assert rep.load_shape_deviation <= 1e-10


def test_indicator_lift_shape(unit_system):
    chi = indicator_lift(unit_system)
    assert np.array_equal(np.sort(np.nonzero(chi)[0]),
                          np.sort(unit_system.dofmap.electrode_nodes))
    assert set(np.unique(chi)) == {0.0, 1.0}


def test_zero_data_stays_identically_zero(unit_system):
    rep = check_zero_data(unit_system, n_steps=500, dt=1e-3)
    assert rep["max_abs_norm"] == 0.0


def test_static_potential_matches_direct_solve():
    mat = build_material(
        c11=4.0, c12=1.5, c13=1.2, c33=3.5, c44=1.0,
        e13=0.0, e15=0.0, e33=0.0, eps11=1.0, eps33=0.8, rho=1.0,
    )
    system = assemble(generate_rect(3, 3), material=mat)
    assert static_potential_check(system, value=2.5) <= 1e-12


def test_static_potential_requires_zero_coupling(unit_system):
    with pytest.raises(PreconditionViolated):
        static_potential_check(unit_system)


def test_regularity_monitor(unit_system, pulse):
    zeros = np.zeros(unit_system.n_u)
    traj = run(unit_system, pulse, zeros, zeros, dt=5e-3, t_end=1.0)
    mon = monitor_regularity(traj.report)
    assert mon["finite"]
    assert mon["max_norm_Bv"] > 0.0
