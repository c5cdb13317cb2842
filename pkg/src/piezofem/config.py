"""Plain-text run configuration.

Format: ``[section]`` headers, one ``key = value`` pair per line,
``#`` starts a comment, blank lines ignored. Unknown sections or keys
are rejected outright so that a typo cannot silently fall back to a
default. Paths are resolved relative to the config file and must exist
at parse time.

Sections and keys::

    [mesh]       path | kind=rect nx ny lx ly tag_top tag_bottom
                 tag_left tag_right
    [material]   preset=pzt4 | c11 c12 c13 c33 c44 e13 e15 e33
                 eps11 eps33 rho, plus alpha beta
    [drive]      kind=trapezoid|table|constant|zero, amplitude t_rise
                 t_hold t_fall t_start | path | value
    [time]       dt t_end alpha_hht
    [output]     dir stride snapshot_stride plots
    [simulate]   check_decay decay_slack identity_tol
    [verify]     oracle_samples oracle_rtol mms_levels mms_dt0
                 mms_t_end mms_kind scale_factors zero_steps seed
                 n_vectors
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .materials import PZT4_LIKE, MaterialSet, build_material
from .mesh import Mesh, generate_rect, load_mesh
from .timeint import Drive, HHTParams

__all__ = ["Config", "OutputOptions", "SimulateOptions", "VerifyOptions",
           "load_config", "parse_sections"]

_MATERIAL_KEYS = (
    "c11", "c12", "c13", "c33", "c44",
    "e13", "e15", "e33", "eps11", "eps33", "rho",
)

_SCHEMA = {
    "mesh": {"path", "kind", "nx", "ny", "lx", "ly",
             "tag_top", "tag_bottom", "tag_left", "tag_right"},
    "material": set(_MATERIAL_KEYS) | {"preset", "alpha", "beta"},
    "drive": {"kind", "amplitude", "t_rise", "t_hold", "t_fall",
              "t_start", "path", "value"},
    "time": {"dt", "t_end", "alpha_hht"},
    "output": {"dir", "stride", "snapshot_stride", "plots"},
    "simulate": {"check_decay", "decay_slack", "identity_tol"},
    "verify": {"oracle_samples", "oracle_rtol", "mms_levels", "mms_dt0",
               "mms_t_end", "mms_kind", "scale_factors", "zero_steps",
               "seed", "n_vectors"},
}


@dataclass
class OutputOptions:
    dir: str = "out"
    stride: int = 1
    snapshot_stride: int = 0      # 0 disables snapshot files
    plots: bool = True


@dataclass
class SimulateOptions:
    check_decay: bool = False
    decay_slack: float = 1.0e-6
    identity_tol: float | None = None


@dataclass
class VerifyOptions:
    oracle_samples: int = 2001
    oracle_rtol: float = 1.0e-10
    mms_levels: tuple = (4, 8, 16)
    mms_dt0: float = 5.0e-3
    mms_t_end: float = 0.3
    mms_kind: str = "quadratic"
    scale_factors: tuple = (1.0e-3, 1.0, 2.0, 1.0e3)
    zero_steps: int = 10_000
    seed: int = 20250817
    n_vectors: int = 100


@dataclass
class Config:
    mesh: Mesh
    material: MaterialSet
    drive: Drive
    dt: float
    t_end: float
    params: HHTParams
    output: OutputOptions = field(default_factory=OutputOptions)
    simulate: SimulateOptions = field(default_factory=SimulateOptions)
    verify: VerifyOptions = field(default_factory=VerifyOptions)


def parse_sections(path: str) -> dict:
    """Read the raw ``{section: {key: value}}`` mapping from a file."""
    sections: dict = {}
    current = None
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    with handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip()
                if current not in _SCHEMA:
                    raise ConfigError(
                        f"{where}: unknown section [{current}]"
                    )
                sections.setdefault(current, {})
                continue
            if "=" not in line:
                raise ConfigError(
                    f"{where}: expected 'key = value', got {line!r}"
                )
            if current is None:
                raise ConfigError(
                    f"{where}: key before any [section] header"
                )
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _SCHEMA[current]:
                raise ConfigError(
                    f"{where}: unknown key {current}.{key}"
                )
            if key in sections[current]:
                raise ConfigError(
                    f"{where}: duplicate key {current}.{key}"
                )
            sections[current][key] = value
    return sections


def _as_float(section: str, key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(
            f"{section}.{key}: expected a number, got {value!r}"
        ) from None


def _as_int(section: str, key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(
            f"{section}.{key}: expected an integer, got {value!r}"
        ) from None


def _as_bool(section: str, key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(
        f"{section}.{key}: expected true/false, got {value!r}"
    )


def _as_tuple(section, key, value, conv):
    try:
        return tuple(conv(part.strip()) for part in value.split(","))
    except ValueError:
        raise ConfigError(
            f"{section}.{key}: expected a comma-separated list, "
            f"got {value!r}"
        ) from None


def _resolve(base_dir: str, path: str, section: str, key: str) -> str:
    resolved = os.path.join(base_dir, path) if not os.path.isabs(path) \
        else path
    if not os.path.exists(resolved):
        raise ConfigError(f"{section}.{key}: no such file {resolved!r}")
    return resolved


def _build_mesh(raw: dict, base_dir: str) -> Mesh:
    if "path" in raw:
        extras = set(raw) - {"path"}
        if extras:
            raise ConfigError(
                "mesh: 'path' excludes " + ", ".join(sorted(extras))
            )
        return load_mesh(_resolve(base_dir, raw["path"], "mesh", "path"))
    kind = raw.get("kind", "rect")
    if kind != "rect":
        raise ConfigError(f"mesh.kind: unknown kind {kind!r}")
    tagging = {
        side: raw[f"tag_{side}"]
        for side in ("top", "bottom", "left", "right")
        if f"tag_{side}" in raw
    }
    return generate_rect(
        nx=_as_int("mesh", "nx", raw.get("nx", "4")),
        ny=_as_int("mesh", "ny", raw.get("ny", "4")),
        lx=_as_float("mesh", "lx", raw.get("lx", "1.0")),
        ly=_as_float("mesh", "ly", raw.get("ly", "1.0")),
        tagging_rule=tagging or None,
    )


def _build_material(raw: dict) -> MaterialSet:
    alpha = _as_float("material", "alpha", raw.get("alpha", "0.0"))
    beta = _as_float("material", "beta", raw.get("beta", "0.0"))
    if "preset" in raw:
        extras = set(raw) - {"preset", "alpha", "beta"}
        if extras:
            raise ConfigError(
                "material: 'preset' excludes " + ", ".join(sorted(extras))
            )
        if raw["preset"] != "pzt4":
            raise ConfigError(
                f"material.preset: unknown preset {raw['preset']!r}"
            )
        return build_material(alpha=alpha, beta=beta, **PZT4_LIKE)
    missing = [key for key in _MATERIAL_KEYS if key not in raw]
    if missing:
        raise ConfigError(
            "material: missing " + ", ".join(missing)
            + " (or use preset = pzt4)"
        )
    constants = {
        key: _as_float("material", key, raw[key]) for key in _MATERIAL_KEYS
    }
    return build_material(alpha=alpha, beta=beta, **constants)


def _build_drive(raw: dict, base_dir: str) -> Drive:
    kind = raw.get("kind", "trapezoid")
    if kind == "zero":
        return Drive.zero()
    if kind == "constant":
        return Drive.constant(
            _as_float("drive", "value", raw.get("value", "1.0"))
        )
    if kind == "table":
        if "path" not in raw:
            raise ConfigError("drive.path: required for kind = table")
        return Drive.from_table(
            _resolve(base_dir, raw["path"], "drive", "path")
        )
    if kind == "trapezoid":
        return Drive.trapezoid(
            amplitude=_as_float(
                "drive", "amplitude", raw.get("amplitude", "1.0")
            ),
            t_rise=_as_float("drive", "t_rise", raw.get("t_rise", "1.0")),
            t_hold=_as_float("drive", "t_hold", raw.get("t_hold", "1.0")),
            t_fall=_as_float("drive", "t_fall", raw.get("t_fall", "1.0")),
            t_start=_as_float(
                "drive", "t_start", raw.get("t_start", "0.0")
            ),
        )
    raise ConfigError(f"drive.kind: unknown kind {kind!r}")


def load_config(path: str) -> Config:
    """Parse, validate, and materialize a full run configuration."""
    sections = parse_sections(path)
    base_dir = os.path.dirname(os.path.abspath(path))

    if "time" not in sections:
        raise ConfigError("missing required section [time]")
    time_raw = sections["time"]
    for key in ("dt", "t_end"):
        if key not in time_raw:
            raise ConfigError(f"time.{key}: required")
    dt = _as_float("time", "dt", time_raw["dt"])
    t_end = _as_float("time", "t_end", time_raw["t_end"])
    if not dt > 0.0:
        raise ConfigError(f"time.dt: must be > 0, got {dt:g}")
    if t_end < 0.0:
        raise ConfigError(f"time.t_end: must be >= 0, got {t_end:g}")
    params = HHTParams(
        alpha_h=_as_float(
            "time", "alpha_hht", time_raw.get("alpha_hht", "-0.05")
        )
    )

    mesh = _build_mesh(sections.get("mesh", {}), base_dir)
    material = _build_material(sections.get("material", {}))
    drive = _build_drive(sections.get("drive", {}), base_dir)

    out_raw = sections.get("output", {})
    output = OutputOptions(
        dir=out_raw.get("dir", "out"),
        stride=_as_int("output", "stride", out_raw.get("stride", "1")),
        snapshot_stride=_as_int(
            "output", "snapshot_stride", out_raw.get("snapshot_stride", "0")
        ),
        plots=_as_bool("output", "plots", out_raw.get("plots", "true")),
    )
    if output.stride < 1:
        raise ConfigError("output.stride: must be >= 1")
    if output.snapshot_stride < 0:
        raise ConfigError("output.snapshot_stride: must be >= 0")

    sim_raw = sections.get("simulate", {})
    simulate = SimulateOptions(
        check_decay=_as_bool(
            "simulate", "check_decay", sim_raw.get("check_decay", "false")
        ),
        decay_slack=_as_float(
            "simulate", "decay_slack", sim_raw.get("decay_slack", "1e-6")
        ),
        identity_tol=(
            _as_float("simulate", "identity_tol", sim_raw["identity_tol"])
            if "identity_tol" in sim_raw
            else None
        ),
    )
    if simulate.check_decay:
        if material.alpha <= 0.0 or material.beta <= 0.0:
            raise ConfigError(
                "simulate.check_decay: requires material.alpha > 0 "
                "and material.beta > 0"
            )
        if drive.t0_off is None:
            raise ConfigError(
                "simulate.check_decay: drive never switches off"
            )
        if drive.t0_off > t_end:
            raise ConfigError(
                f"simulate.check_decay: drive switches off at "
                f"{drive.t0_off:g} which is past t_end = {t_end:g}"
            )

    ver_raw = sections.get("verify", {})
    defaults = VerifyOptions()
    verify = VerifyOptions(
        oracle_samples=_as_int(
            "verify", "oracle_samples",
            ver_raw.get("oracle_samples", str(defaults.oracle_samples)),
        ),
        oracle_rtol=_as_float(
            "verify", "oracle_rtol",
            ver_raw.get("oracle_rtol", repr(defaults.oracle_rtol)),
        ),
        mms_levels=(
            _as_tuple("verify", "mms_levels", ver_raw["mms_levels"], int)
            if "mms_levels" in ver_raw else defaults.mms_levels
        ),
        mms_dt0=_as_float(
            "verify", "mms_dt0",
            ver_raw.get("mms_dt0", repr(defaults.mms_dt0)),
        ),
        mms_t_end=_as_float(
            "verify", "mms_t_end",
            ver_raw.get("mms_t_end", repr(defaults.mms_t_end)),
        ),
        mms_kind=ver_raw.get("mms_kind", defaults.mms_kind),
        scale_factors=(
            _as_tuple(
                "verify", "scale_factors", ver_raw["scale_factors"], float
            )
            if "scale_factors" in ver_raw else defaults.scale_factors
        ),
        zero_steps=_as_int(
            "verify", "zero_steps",
            ver_raw.get("zero_steps", str(defaults.zero_steps)),
        ),
        seed=_as_int(
            "verify", "seed", ver_raw.get("seed", str(defaults.seed))
        ),
        n_vectors=_as_int(
            "verify", "n_vectors",
            ver_raw.get("n_vectors", str(defaults.n_vectors)),
        ),
    )
    if verify.mms_kind not in ("constant", "affine", "quadratic"):
        raise ConfigError(
            f"verify.mms_kind: unknown kind {verify.mms_kind!r}"
        )

    return Config(
        mesh=mesh,
        material=material,
        drive=drive,
        dt=dt,
        t_end=t_end,
        params=params,
        output=output,
        simulate=simulate,
        verify=verify,
    )
