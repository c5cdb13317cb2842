"""Command-line driver.

Subcommands:

* ``simulate  <config>``  -- run a transient simulation, write the
  energy/norm time series (CSV), a JSON summary, optional binary state
  snapshots, and overview figures.
* ``verify    <config> --study NAME`` -- run one verification study
  (oracle, mms, coercivity, scaling, lift, zero) and write its JSON
  report.
* ``mesh-gen`` -- write a structured rectangle mesh file.
* ``dump-system <config>`` -- write the assembled operators as plain
  triplet text files.

Exit codes: 0 success, 1 verification failure, 2 invalid input,
3 internal solver failure. Every failure prints a single diagnostic
line to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .assembly import assemble, write_triplets
from .config import Config, load_config
from .energy import check_energy_identity, check_monotone_decay
from .errors import (
    InputError,
    InternalError,
    PiezoError,
    RateFailure,
    VerificationFailure,
)
from .mesh import save_mesh
from .report import (
    SnapshotWriter,
    render_figures,
    write_summary_json,
    write_trajectory_csv,
)
from .timeint import run
from .verify import (
    check_apriori_bound,
    check_coercivity,
    check_lift_independence,
    check_zero_data,
    dense_oracle,
    manufactured_convergence,
    terminal_difference,
)

STUDIES = ("oracle", "mms", "coercivity", "scaling", "lift", "zero")

# Pass thresholds applied by `verify`; studies report their raw numbers
# in JSON regardless of the outcome.
ORACLE_IDENTITY_TOL = 1.0e-8
ORACLE_DIFF_TOL = 1.0e-4
EXACT_CASE_TOL = 1.0e-9
SCALING_TOL = 1.0e-10
LIFT_TOL = 1.0e-10
ZERO_TOL = 1.0e-12
RATE_BAND = (1.7, 2.3)


def _write_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _outdir(cfg: Config) -> str:
    os.makedirs(cfg.output.dir, exist_ok=True)
    return cfg.output.dir


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(cfg)
    system = assemble(cfg.mesh, material=cfg.material)
    zeros = np.zeros(system.n_u)

    observers = []
    snapshot_path = None
    writer = None
    if cfg.output.snapshot_stride > 0:
        snapshot_path = os.path.join(out, "snapshots.bin")
        writer = SnapshotWriter(snapshot_path, cfg.output.snapshot_stride)
        observers.append(writer)
    try:
        traj = run(
            system, cfg.drive, zeros, zeros, cfg.dt, cfg.t_end,
            params=cfg.params, observers=tuple(observers),
        )
    finally:
        if writer is not None:
            writer.close()
    report = traj.report

    csv_path = os.path.join(out, "trajectory.csv")
    write_trajectory_csv(report, csv_path, stride=cfg.output.stride)

    verdict = None
    if cfg.simulate.check_decay:
        verdict = check_monotone_decay(
            report, slack=cfg.simulate.decay_slack
        )
    summary_path = os.path.join(out, "summary.json")
    summary = write_summary_json(report, summary_path, verdict)

    written = [csv_path, summary_path]
    if snapshot_path is not None:
        written.append(snapshot_path)
    if cfg.output.plots:
        written.extend(render_figures(report, cfg.drive, out))
    for path in written:
        print(f"wrote {path}")
    print(
        f"steps={len(report.t) - 1} "
        f"eta_tilde_final={summary['eta_tilde_final']:.6e} "
        f"max_identity_residual={summary['max_identity_residual']:.3e}"
    )

    if cfg.simulate.identity_tol is not None:
        check_energy_identity(report, tol=cfg.simulate.identity_tol)
    if verdict is not None and not verdict.monotone:
        raise VerificationFailure(
            f"energy rose after drive switch-off by "
            f"{verdict.max_rise:.3f} slack units"
        )
    return 0


# ---------------------------------------------------------------------------
# verify studies
# ---------------------------------------------------------------------------

def _study_oracle(cfg: Config) -> tuple[dict, None]:
    system = assemble(cfg.mesh, material=cfg.material)
    zeros = np.zeros(system.n_u)
    oracle = dense_oracle(
        system, cfg.drive, zeros, zeros, cfg.t_end,
        n_samples=cfg.verify.oracle_samples,
        rtol=cfg.verify.oracle_rtol,
    )
    diff_coarse = terminal_difference(
        oracle,
        run(system, cfg.drive, zeros, zeros, cfg.dt, cfg.t_end,
            params=cfg.params),
    )
    diff_fine = terminal_difference(
        oracle,
        run(system, cfg.drive, zeros, zeros, cfg.dt / 2.0, cfg.t_end,
            params=cfg.params),
    )
    residual = oracle.report.max_identity_residual
    payload = {
        "study": "oracle",
        "n_dofs": oracle.n_dofs,
        "rtol": oracle.rtol,
        "max_identity_residual": residual,
        "terminal_difference_dt": diff_coarse,
        "terminal_difference_half_dt": diff_fine,
    }
    failure = None
    if residual > ORACLE_IDENTITY_TOL:
        failure = VerificationFailure(
            f"oracle energy-identity residual {residual:.3e} exceeds "
            f"{ORACLE_IDENTITY_TOL:.1e}"
        )
    elif diff_coarse > ORACLE_DIFF_TOL:
        failure = VerificationFailure(
            f"terminal difference {diff_coarse:.3e} exceeds "
            f"{ORACLE_DIFF_TOL:.1e}"
        )
    elif not diff_fine < diff_coarse:
        failure = VerificationFailure(
            f"halving dt did not reduce the terminal error "
            f"({diff_coarse:.3e} -> {diff_fine:.3e})"
        )
    return payload, failure


def _study_mms(cfg: Config) -> tuple[dict, None]:
    rep = manufactured_convergence(
        cfg.material,
        levels=cfg.verify.mms_levels,
        dt0=cfg.verify.mms_dt0,
        t_end=cfg.verify.mms_t_end,
        kind=cfg.verify.mms_kind,
        params=cfg.params,
        rate_floor=None,
    )
    payload = {"study": "mms", **rep.as_dict()}
    failure = None
    if rep.rate_u is None:
        worst = max(
            max(lv.err_u for lv in rep.levels),
            max(lv.err_phi for lv in rep.levels),
        )
        if worst > EXACT_CASE_TOL:
            failure = VerificationFailure(
                f"exact case error {worst:.3e} exceeds "
                f"{EXACT_CASE_TOL:.1e}"
            )
    else:
        lo, hi = RATE_BAND
        for label, rate in (
            ("displacement", rep.rate_u), ("potential", rep.rate_phi)
        ):
            if not lo <= rate <= hi:
                failure = RateFailure(
                    f"{label} rate {rate:.3f} outside [{lo}, {hi}]"
                )
                break
    return payload, failure


def _study_coercivity(cfg: Config) -> tuple[dict, None]:
    system = assemble(cfg.mesh, material=cfg.material)
    rep = check_coercivity(
        system, n_vectors=cfg.verify.n_vectors, seed=cfg.verify.seed
    )
    return {
        "study": "coercivity",
        "n_vectors": rep.n_vectors,
        "seed": rep.seed,
        "min_margin_mech": rep.min_margin_mech,
        "min_margin_elec": rep.min_margin_elec,
    }, None


def _study_scaling(cfg: Config) -> tuple[dict, None]:
    system = assemble(cfg.mesh, material=cfg.material)
    zeros = np.zeros(system.n_u)
    base = run(system, cfg.drive, zeros, zeros, cfg.dt, cfg.t_end,
               params=cfg.params)
    rep = check_apriori_bound(base, cfg.verify.scale_factors)
    payload = {
        "study": "scaling",
        "scale_factors": list(rep.scale_factors),
        "max_rel_deviation": rep.max_rel_deviation,
        "stability_constants": rep.stability_constants,
    }
    failure = None
    if rep.max_rel_deviation > SCALING_TOL:
        failure = VerificationFailure(
            f"scaled outputs deviate by {rep.max_rel_deviation:.3e} "
            f"(tolerance {SCALING_TOL:.1e})"
        )
    return payload, failure


def _study_lift(cfg: Config) -> tuple[dict, None]:
    rep = check_lift_independence(
        cfg.mesh, cfg.material, cfg.drive, cfg.dt, cfg.t_end,
        params=cfg.params,
    )
    payload = {
        "study": "lift",
        "max_rel_u": rep.max_rel_u,
        "max_rel_phi": rep.max_rel_phi,
        "load_shape_deviation": rep.load_shape_deviation,
    }
    failure = None
    worst = max(rep.max_rel_u, rep.max_rel_phi)
    if worst > LIFT_TOL:
        failure = VerificationFailure(
            f"solution depends on the lift extension: deviation "
            f"{worst:.3e} (tolerance {LIFT_TOL:.1e})"
        )
    return payload, failure


def _study_zero(cfg: Config) -> tuple[dict, None]:
    system = assemble(cfg.mesh, material=cfg.material)
    rep = check_zero_data(
        system, n_steps=cfg.verify.zero_steps, dt=cfg.dt,
        params=cfg.params,
    )
    payload = {"study": "zero", **rep}
    failure = None
    if rep["max_abs_norm"] > ZERO_TOL:
        failure = VerificationFailure(
            f"zero data produced norm {rep['max_abs_norm']:.3e} "
            f"(tolerance {ZERO_TOL:.1e})"
        )
    return payload, failure


_STUDY_FNS = {
    "oracle": _study_oracle,
    "mms": _study_mms,
    "coercivity": _study_coercivity,
    "scaling": _study_scaling,
    "lift": _study_lift,
    "zero": _study_zero,
}


def _cmd_verify(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(cfg)
    payload, failure = _STUDY_FNS[args.study](cfg)
    path = os.path.join(out, f"study_{args.study}.json")
    _write_json(payload, path)
    print(f"wrote {path}")
    if failure is not None:
        raise failure
    metrics = [
        f"{key}={value:.3e}"
        for key, value in sorted(payload.items())
        if isinstance(value, float)
    ]
    print(" ".join([f"study {args.study}: pass"] + metrics))
    return 0


# ---------------------------------------------------------------------------
# mesh-gen / dump-system
# ---------------------------------------------------------------------------

def _cmd_mesh_gen(args) -> int:
    cfg = load_config(args.config)
    out_path = args.out or os.path.join(_outdir(cfg), "mesh.mesh")
    save_mesh(cfg.mesh, out_path)
    mesh = cfg.mesh
    print(
        f"wrote {out_path}: {mesh.n_nodes} nodes, {mesh.n_cells} cells, "
        f"{len(mesh.facets)} boundary facets"
    )
    return 0


def _cmd_dump_system(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(cfg)
    system = assemble(cfg.mesh, material=cfg.material)
    matrices = {
        "M": system.M,
        "C": system.C_damp,
        "K_uu": system.K_uu,
        "K_uphi": system.K_uphi,
        "K_phiphi": system.K_phiphi,
        "L_B": system.L_B,
        "L_phi": system.L_phi,
    }
    for name, matrix in matrices.items():
        path = os.path.join(out, f"{name}.txt")
        write_triplets(matrix, path)
        print(f"wrote {path}")
    vectors = {
        "chi": system.chi,
        "f_unit": system.f_unit,
        "g_unit": system.g_unit,
    }
    for name, vector in vectors.items():
        path = os.path.join(out, f"{name}.txt")
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for index, value in enumerate(vector):
                handle.write(f"{index} {value!r}\n")
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="piezofem",
        description=(
            "Transient finite-element simulation of voltage-driven "
            "piezoelectric solids, with built-in verification studies."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser(
        "simulate", help="run a transient simulation from a config file"
    )
    p_sim.add_argument("config", help="path to the run configuration")
    p_sim.set_defaults(fn=_cmd_simulate)

    p_ver = sub.add_parser(
        "verify", help="run one verification study from a config file"
    )
    p_ver.add_argument("config", help="path to the run configuration")
    p_ver.add_argument(
        "--study", required=True, choices=STUDIES,
        help="which verification study to run",
    )
    p_ver.set_defaults(fn=_cmd_verify)

    p_gen = sub.add_parser(
        "mesh-gen",
        help="write the mesh described by a config file",
    )
    p_gen.add_argument("config", help="path to the run configuration")
    p_gen.add_argument(
        "--out", help="output mesh path (default: <output.dir>/mesh.mesh)"
    )
    p_gen.set_defaults(fn=_cmd_mesh_gen)

    p_dump = sub.add_parser(
        "dump-system",
        help="write assembled operators as triplet text files",
    )
    p_dump.add_argument("config", help="path to the run configuration")
    p_dump.set_defaults(fn=_cmd_dump_system)

    return parser


def _diagnose(exc: BaseException) -> str:
    message = " ".join(str(exc).split())
    return f"piezofem: error: {type(exc).__name__}: {message}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except VerificationFailure as exc:
        print(_diagnose(exc), file=sys.stderr)
        return 1
    except (InputError, OSError) as exc:
        print(_diagnose(exc), file=sys.stderr)
        return 2
    except (InternalError, PiezoError) as exc:
        print(_diagnose(exc), file=sys.stderr)
        return 3
    except Exception as exc:          # pragma: no cover
        print(_diagnose(exc), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
