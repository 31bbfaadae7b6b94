"""
Sectioned key=value experiment configuration.

Every key has a documented default (see ``SCHEMA``); unknown sections or
keys are rejected.  ``dump_config`` writes the fully resolved configuration
in canonical form, so dump(parse(dump(cfg))) is byte-identical.

Seeds: ``run.seed`` is the base seed; forcing, reference and initial-guess
seeds default to base, base + 1 and base + 2 unless set explicitly.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass

from nsalpha_da.assimilation import AssimilationConfig, InitialCondition
from nsalpha_da.dynamics import ForcingSpec, PhysicalSetup, StepParams
from nsalpha_da.errors import ConfigurationError
from nsalpha_da.observers import ObserverSpec, make_observer
from nsalpha_da.spectral import GridSpec

REQUIRED = object()
AUTO = "auto"

# section -> key -> (kind, default); kinds: float, int, str, auto_float, triple
SCHEMA = {
    "grid": {"L": ("float", 2 * math.pi), "N": ("int", 32)},
    "physics": {"nu": ("float", REQUIRED), "alpha": ("float", REQUIRED)},
    "forcing": {
        "kind": ("str", "low_mode_deterministic"),
        "amplitude": ("float", None),
        "grashof": ("float", None),
        "max_mode": ("int", 2),
        "seed": ("int", None),
    },
    "observer": {
        "kind": ("str", "modes"),
        "h": ("float", None),
        "cells_per_dim": ("int", None),
        "approx_class": ("str", None),
        "c1": ("float", None),
        "c2": ("float", None),
        "node_offset": ("triple", (0.5, 0.5, 0.5)),
    },
    "assimilation": {
        "mu": ("float", REQUIRED),
        "dt": ("float", 0.01),
        "t_spinup": ("auto_float", AUTO),
        "t_final": ("float", 20.0),
        "k3": ("float", 1.0),
        "spinup_max": ("float", 200.0),
    },
    "reference": {
        "kind": ("str", "random"),
        "amplitude": ("float", 0.5),
        "max_mode": ("float", 4.0),
        "seed": ("int", None),
        "path": ("str", ""),
    },
    "initial_guess": {
        "kind": ("str", "zero"),
        "amplitude": ("float", 0.5),
        "max_mode": ("float", 4.0),
        "seed": ("int", None),
        "path": ("str", ""),
    },
    "output": {"dir": ("str", "out"), "records_every": ("float", 0.1)},
    "run": {"seed": ("int", 0)},
}


class ConfigValidationError(ConfigurationError):
    """Collected validation failures; ``errors`` is a list of (key path, message)."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    values: tuple  # canonical ((section, ((key, text), ...)), ...)
    assimilation: AssimilationConfig
    out_dir: str
    records_every: float
    seed: int

    @property
    def setup(self) -> PhysicalSetup:
        return self.assimilation.setup

    @property
    def observer(self) -> ObserverSpec:
        return self.assimilation.observer

    def get(self, section: str, key: str) -> str | None:
        return dict(dict(self.values).get(section, ())).get(key)


def _fmt(kind, value) -> str:
    if kind == "triple":
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(kind, text: str):
    text = text.strip()
    if kind == "float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError(f"not a finite number: {text!r}")
        return v
    if kind == "int":
        return int(text)
    if kind == "auto_float":
        return AUTO if text.lower() == AUTO else _convert("float", text)
    if kind == "triple":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError("expected three comma-separated numbers")
        return tuple(parts)
    return text


def _read(text: str):
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigValidationError([("<file>", str(exc).splitlines()[0])]) from exc
    errors = []
    raw = {}
    for section in cp.sections():
        if section not in SCHEMA:
            errors.append((section, "unknown section"))
            continue
        for key, val in cp.items(section):
            if key not in SCHEMA[section]:
                errors.append((f"{section}.{key}", "unknown key"))
                continue
            kind, _ = SCHEMA[section][key]
            try:
                raw[(section, key)] = _convert(kind, val)
            except ValueError as exc:
                errors.append((f"{section}.{key}", f"type mismatch ({kind}): {exc}"))
    return raw, errors


def parse_config(text: str, seed: int | None = None, records_every: float | None = None) -> ExperimentConfig:
    """Parse and validate; command-line overrides replace run.seed / output.records_every."""
    raw, errors = _read(text)
    if seed is not None:
        raw[("run", "seed")] = int(seed)
    if records_every is not None:
        raw[("output", "records_every")] = float(records_every)
    vals = {}
    for section, keys in SCHEMA.items():
        for key, (kind, default) in keys.items():
            if (section, key) in raw:
                vals[(section, key)] = raw[(section, key)]
            elif default is REQUIRED:
                errors.append((f"{section}.{key}", "required key missing"))
            else:
                vals[(section, key)] = default
    if errors:
        raise ConfigValidationError(errors)
    return _build(vals)


def _build(vals: dict) -> ExperimentConfig:
    errors = []

    def v(s, k):
        return vals[(s, k)]

    def check(path, fn):
        try:
            return fn()
        except (ConfigurationError, ValueError) as exc:
            errors.append((path, str(exc)))
            return None

    base = v("run", "seed")
    for s, off in (("forcing", 0), ("reference", 1), ("initial_guess", 2)):
        if vals[(s, "seed")] is None:
            vals[(s, "seed")] = base + off

    grid = check("grid", lambda: GridSpec(v("grid", "L"), v("grid", "N")))
    nu, alpha = v("physics", "nu"), v("physics", "alpha")
    if not nu > 0:
        errors.append(("physics.nu", "must be > 0"))
    if not alpha > 0:
        errors.append(("physics.alpha", "must be > 0"))

    amp, G = v("forcing", "amplitude"), v("forcing", "grashof")
    kind = v("forcing", "kind")
    if amp is not None and G is not None:
        errors.append(("forcing.grashof", "give either amplitude or grashof, not both"))
    if (amp is not None and amp < 0) or (G is not None and G < 0):
        errors.append(("forcing.amplitude" if amp is not None else "forcing.grashof", "must be >= 0"))
    if kind == "low_mode_deterministic" and amp is None and G is None:
        errors.append(("forcing.amplitude", "low-mode forcing needs amplitude or grashof"))
    forcing = None
    if grid is not None and not errors:
        if G is not None:
            amp_v = G * nu**2 * grid.lambda1**0.75
        else:
            amp_v = amp if amp is not None else 0.0
        forcing = check(
            "forcing.kind", lambda: ForcingSpec(kind, amp_v, v("forcing", "max_mode"), v("forcing", "seed"))
        )

    obs = None
    okind = v("observer", "kind")
    if grid is not None:
        if okind not in ("modes", "volumes", "nodes"):
            errors.append(("observer.kind", f"must be modes|volumes|nodes, got {okind!r}"))
        else:
            expected = "type2" if okind == "nodes" else "type1"
            ac = v("observer", "approx_class")
            if ac is not None and ac != expected:
                errors.append(("observer.approx_class", f"kind={okind} requires {expected}, got {ac}"))
            elif okind == "modes" and v("observer", "h") is None:
                errors.append(("observer.h", "modes observer needs h"))
            elif okind != "modes" and v("observer", "cells_per_dim") is None and v("observer", "h") is None:
                errors.append(("observer.cells_per_dim", f"{okind} observer needs cells_per_dim or h"))
            else:
                obs = check(
                    "observer",
                    lambda: make_observer(
                        okind,
                        grid,
                        h=v("observer", "h"),
                        cells_per_dim=v("observer", "cells_per_dim"),
                        c1=v("observer", "c1"),
                        c2=v("observer", "c2"),
                        node_offset=v("observer", "node_offset"),
                    ),
                )

    mu = v("assimilation", "mu")
    if not mu >= 0:
        errors.append(("assimilation.mu", "must be >= 0"))
    dt = v("assimilation", "dt")
    if not dt > 0:
        errors.append(("assimilation.dt", "must be > 0"))
    ts = v("assimilation", "t_spinup")
    if ts != AUTO and ts < 0:
        errors.append(("assimilation.t_spinup", "must be >= 0 or auto"))
    if not v("assimilation", "t_final") > 0:
        errors.append(("assimilation.t_final", "must be > 0"))
    if not v("assimilation", "k3") > 0:
        errors.append(("assimilation.k3", "must be > 0"))
    rec = v("output", "records_every")
    if not rec > 0:
        errors.append(("output.records_every", "must be > 0"))
    elif dt > 0 and abs(round(rec / dt) * dt - rec) > 1e-9 * rec or (dt > 0 and round(rec / dt) < 1):
        errors.append(("output.records_every", f"must be a positive multiple of dt={dt}"))

    ics = {}
    for s in ("reference", "initial_guess"):
        ics[s] = check(
            f"{s}.kind",
            lambda s=s: InitialCondition(
                v(s, "kind"), v(s, "amplitude"), v(s, "max_mode"), v(s, "seed"), v(s, "path")
            ),
        )
    if ics["reference"] is not None and ics["reference"].kind == "snapshot" and not v("reference", "path"):
        errors.append(("reference.path", "snapshot reference needs a path"))

    if errors:
        raise ConfigValidationError(errors)
    setup = PhysicalSetup(grid, nu, alpha, forcing)
    acfg = AssimilationConfig(
        setup=setup,
        observer=obs,
        mu=mu,
        step=StepParams(dt),
        t_final=v("assimilation", "t_final"),
        t_spinup=None if ts == AUTO else ts,
        u0=ics["reference"],
        w0=ics["initial_guess"],
        k3=v("assimilation", "k3"),
        records_every=rec,
        spinup_max=v("assimilation", "spinup_max"),
    )
    canon = []
    for section, keys in SCHEMA.items():
        items = []
        for key, (kind, _) in keys.items():
            val = vals[(section, key)]
            if val is None:
                continue
            items.append((key, _fmt(kind, val)))
        canon.append((section, tuple(items)))
    return ExperimentConfig(tuple(canon), acfg, v("output", "dir"), rec, base)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section, items in cfg.values:
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {t}" for k, t in items)
        lines.append("")
    return "\n".join(lines)


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)
