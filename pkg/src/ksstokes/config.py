"""Flat ``key = value`` run configuration files.

Lines are ``key = value``; ``#`` starts a comment. Vectors are comma separated, a list
of bumps is ``x,y[,z],width,amplitude`` entries separated by ``;``. Unknown keys are an
error. See the README for the full key table.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .diagnostics import DiagnosticsConfig
from .errors import ConfigError, KSSError
from .fields import Grid
from .model import Bump, ForcingSpec, InitialData, ModelParams, ScalarInit, VelocityInit
from .poisson import PoissonSolveParams
from .transport import StepControl


@dataclass
class RunConfig:
    model: ModelParams
    init: InitialData
    grid: Grid
    step: StepControl = field(default_factory=StepControl)
    diag: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    t_end: float = 1.0
    output_dir: Path = Path("out")
    snapshot_times: tuple = ()
    seed: int = 0
    psolve: PoissonSolveParams = field(default_factory=PoissonSolveParams)

    def __post_init__(self):
        if not self.t_end > 0:
            raise ConfigError("must be positive", "t_end")
        times = tuple(sorted(float(t) for t in self.snapshot_times))
        if any(t < 0 or t > self.t_end for t in times):
            raise ConfigError(f"snapshot times must lie in [0, {self.t_end}]", "output.snapshot_times")
        self.snapshot_times = times
        self.output_dir = Path(self.output_dir)


_SCALAR_KEYS = ("kind", "value", "bumps", "center", "width", "amplitude", "floor", "mass")
KNOWN_KEYS = {
    "alpha", "kappa_s", "gravity", "forcing.kind", "forcing.amplitude", "forcing.omega",
    "fluid_enabled", "grid.cells", "grid.lengths",
    *(f"init.{f}.{k}" for f in ("n0", "c0") for k in _SCALAR_KEYS),
    "init.u0.kind", "init.u0.amplitude", "init.u0.smoothing",
    "dt_safety", "dt_max", "dt_min", "t_end", "seed",
    "diag.p_list", "diag.tau", "diag.sample_every", "diag.blowup_growth_factor",
    "diag.blowup_dt_floor", "diag.identity_residual",
    "poisson.method", "poisson.tolerance", "poisson.max_iterations",
    "output.dir", "output.snapshot_times",
}


def parse_kv(text, source="<config>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def _float(d, key, default=None):
    if key not in d:
        return default
    try:
        return float(d[key])
    except ValueError:
        raise ConfigError(f"not a number: {d[key]!r}", key) from None


def _int(d, key, default=None):
    if key not in d:
        return default
    try:
        return int(d[key])
    except ValueError:
        raise ConfigError(f"not an integer: {d[key]!r}", key) from None


def _floats(d, key, default=None):
    if key not in d:
        return default
    text = d[key].strip()
    if text.lower() in ("", "none"):
        return ()
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"not a list of numbers: {d[key]!r}", key) from None


def _bool(d, key, default):
    if key not in d:
        return default
    v = d[key].strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {d[key]!r}", key)


def _scalar_init(d, name, dim):
    pre = f"init.{name}."
    kind = d.get(pre + "kind", "zero")
    bumps = ()
    if kind == "gaussian":
        center = _floats(d, pre + "center")
        if center is None:
            raise ConfigError("gaussian needs a center", pre + "center")
        bumps = (Bump(center, _float(d, pre + "width", 0.1), _float(d, pre + "amplitude", 1.0)),)
    elif kind == "bumps":
        spec = d.get(pre + "bumps", "")
        items = [s for s in spec.split(";") if s.strip()]
        parsed = []
        for item in items:
            try:
                nums = [float(x) for x in item.split(",")]
            except ValueError:
                raise ConfigError(f"bad bump entry {item!r}", pre + "bumps") from None
            if len(nums) != dim + 2:
                raise ConfigError(f"bump entry needs {dim} coordinates, width, amplitude", pre + "bumps")
            parsed.append(Bump(tuple(nums[:dim]), nums[dim], nums[dim + 1]))
        if not parsed:
            raise ConfigError("empty bump list", pre + "bumps")
        bumps = tuple(parsed)
    return ScalarInit(kind=kind, value=_float(d, pre + "value", 0.0), bumps=bumps,
                      floor=_float(d, pre + "floor", 0.0), mass=_float(d, pre + "mass"))


def config_from_dict(d, base_dir=Path(".")) -> RunConfig:
    unknown = sorted(set(d) - KNOWN_KEYS)
    if unknown:
        raise ConfigError("unknown key", unknown[0])
    stage = "grid.cells"
    try:
        cells = _floats(d, "grid.cells")
        if not cells:
            raise ConfigError("required", "grid.cells")
        lengths = _floats(d, "grid.lengths", (1.0,) * len(cells))
        if len(lengths) == 1:
            lengths = lengths * len(cells)
        grid = Grid(tuple(int(c) for c in cells), lengths)
        stage = "model"
        gravity = _floats(d, "gravity")
        forcing = ForcingSpec(d.get("forcing.kind", "zero"), _floats(d, "forcing.amplitude", ()),
                              _float(d, "forcing.omega", 0.0))
        model = ModelParams(alpha=_float(d, "alpha", 0.6), kappa_s=_float(d, "kappa_s", 1.0),
                            gravity=gravity or None, forcing=forcing,
                            fluid_enabled=_bool(d, "fluid_enabled", True))
        stage = "init"
        init = InitialData(
            n0=_scalar_init(d, "n0", grid.dim), c0=_scalar_init(d, "c0", grid.dim),
            u0=VelocityInit(d.get("init.u0.kind", "zero"), _float(d, "init.u0.amplitude", 1.0),
                            _float(d, "init.u0.smoothing", 2.0)))
        stage = "dt_safety"
        step = StepControl(_float(d, "dt_safety", 0.4), _float(d, "dt_max", float("inf")),
                           _float(d, "dt_min", 1e-9))
        stage = "diag"
        diag = DiagnosticsConfig(
            p_list=_floats(d, "diag.p_list", (2.0, 4.0, 6.0)), tau=_float(d, "diag.tau"),
            sample_every=_int(d, "diag.sample_every", 10),
            blowup_growth_factor=_float(d, "diag.blowup_growth_factor", 100.0),
            blowup_dt_floor=_float(d, "diag.blowup_dt_floor", step.dt_min),
            identity_residual=_bool(d, "diag.identity_residual", True))
        stage = "poisson"
        psolve = PoissonSolveParams(_float(d, "poisson.tolerance", 1e-10),
                                    _int(d, "poisson.max_iterations"), d.get("poisson.method", "cg"))
        stage = "t_end"
        out_dir = Path(d.get("output.dir", "out"))
        if not out_dir.is_absolute():
            out_dir = base_dir / out_dir
        return RunConfig(model, init, grid, step, diag, _float(d, "t_end", 1.0), out_dir,
                         _floats(d, "output.snapshot_times", ()), _int(d, "seed", 0), psolve)
    except ConfigError:
        raise
    except KSSError as exc:
        raise ConfigError(str(exc), stage) from exc


def load_config(path, overrides=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    d = parse_kv(text, str(path))
    d.update(overrides or {})
    return config_from_dict(d, base_dir=Path.cwd())


@dataclass
class SweepSpec:
    alpha_values: tuple
    replicate_seeds: tuple
    base: RunConfig
    workers: int = 1

    def __post_init__(self):
        if not self.alpha_values:
            raise ConfigError("needs at least one value", "alpha_values")
        if any(a < 0 for a in self.alpha_values):
            raise ConfigError("values must be >= 0", "alpha_values")
        if not self.replicate_seeds:
            self.replicate_seeds = (self.base.seed,)


def load_sweep(path, output_dir=None) -> SweepSpec:
    """Sweep files: ``base``, ``alpha_values``, ``seeds``, ``workers``, ``output.dir`` and
    ``set.<key>`` overrides applied to the base run config."""
    path = Path(path)
    d = parse_kv(path.read_text(), str(path))
    known = {"base", "alpha_values", "seeds", "workers", "output.dir"}
    overrides = {}
    for key, value in d.items():
        if key.startswith("set."):
            overrides[key[4:]] = value
        elif key not in known:
            raise ConfigError("unknown key", key)
    if "base" not in d:
        raise ConfigError("required", "base")
    base_path = Path(d["base"])
    if not base_path.is_absolute():
        base_path = path.parent / base_path
    if output_dir is not None:
        overrides["output.dir"] = str(output_dir)
    elif "output.dir" in d:
        overrides["output.dir"] = d["output.dir"]
    base = load_config(base_path, overrides)
    seeds = tuple(int(s) for s in _floats(d, "seeds", ()) or ())
    return SweepSpec(_floats(d, "alpha_values", ()), seeds, base, _int(d, "workers", 1))


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **changes)
