"""Transient finite elements for voltage-driven piezoelectric solids.

The package couples linear elastodynamics with electrostatics on
simplicial meshes, drives the electrode potential through a
user-supplied voltage history, and ships a verification harness built
on independent solution routes: a dense adaptive reference integrator,
manufactured solutions with measured convergence rates, exact
linearity/scaling relations, coercivity certificates, and lift
independence.

Set ``PIEZO_THREADS`` in the environment to cap the linear-algebra
thread pools; it must be set before this package is first imported.
"""

import os as _os

# Thread caps must land before numpy spins up its BLAS backend, which
# is why this block sits above every other import in the package.
_threads = _os.environ.get("PIEZO_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .assembly import (                                    # noqa: E402
    AssembledSystem,
    assemble,
    build_dirichlet_lift,
    element_matrices,
    replace_lift,
    write_triplets,
)
from .energy import (                                      # noqa: E402
    CSV_COLUMNS,
    DecayVerdict,
    EnergyReport,
    EnergyTracker,
    check_energy_identity,
    check_monotone_decay,
    monotone_after_off,
)
from .errors import (                                      # noqa: E402
    CoercivityViolation,
    ConfigError,
    DegenerateCell,
    DimensionMismatch,
    InputError,
    InternalError,
    InvalidDimension,
    InvalidScalar,
    NonFiniteState,
    NonPositiveDefinite,
    ParseError,
    PiezoError,
    PreconditionViolated,
    RateFailure,
    SingularLift,
    SolveFailure,
    StiffnessFailure,
    TooLarge,
    TopologyError,
    VerificationFailure,
)
from .materials import (                                   # noqa: E402
    PZT4_LIKE,
    MaterialSet,
    Reduced2D,
    build_material,
    reduce_2d,
    smallest_eigenvalues,
)
from .mesh import (                                        # noqa: E402
    ELECTRODE,
    GROUND,
    REMAINING,
    DofMap,
    Mesh,
    build_dofmap,
    generate_rect,
    load_mesh,
    mesh_size,
    save_mesh,
)
from .timeint import (                                     # noqa: E402
    Drive,
    HHTParams,
    HHTStepper,
    State,
    Trajectory,
    hht_step,
    initialize,
    run,
    solve_potential,
)
from .verify import (                                      # noqa: E402
    MMSReport,
    OracleRun,
    check_apriori_bound,
    check_coercivity,
    check_lift_independence,
    check_zero_data,
    dense_oracle,
    indicator_lift,
    manufactured_convergence,
    static_potential_check,
    terminal_difference,
    unit_scale_material,
)

__all__ = [
    "__version__",
    # assembly
    "AssembledSystem", "assemble", "build_dirichlet_lift",
    "element_matrices", "replace_lift", "write_triplets",
    # energy
    "CSV_COLUMNS", "DecayVerdict", "EnergyReport", "EnergyTracker",
    "check_energy_identity", "check_monotone_decay",
    "monotone_after_off",
    # errors
    "PiezoError", "InputError", "VerificationFailure", "InternalError",
    "InvalidScalar", "NonPositiveDefinite", "ParseError", "ConfigError",
    "TopologyError", "InvalidDimension", "DimensionMismatch",
    "DegenerateCell", "TooLarge", "RateFailure", "CoercivityViolation",
    "PreconditionViolated", "SingularLift", "SolveFailure",
    "NonFiniteState", "StiffnessFailure",
    # materials
    "PZT4_LIKE", "MaterialSet", "Reduced2D", "build_material",
    "reduce_2d", "smallest_eigenvalues",
    # mesh
    "ELECTRODE", "GROUND", "REMAINING", "Mesh", "DofMap",
    "build_dofmap", "generate_rect", "load_mesh", "save_mesh",
    "mesh_size",
    # time integration
    "Drive", "HHTParams", "HHTStepper", "State", "Trajectory",
    "hht_step", "initialize", "run", "solve_potential",
    # verification
    "MMSReport", "OracleRun", "check_apriori_bound", "check_coercivity",
    "check_lift_independence", "check_zero_data", "dense_oracle",
    "indicator_lift", "manufactured_convergence",
    "static_potential_check", "terminal_difference",
    "unit_scale_material",
]
