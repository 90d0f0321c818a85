"""Flat ``section.key = value`` experiment configuration."""
from dataclasses import dataclass, field
import math
from pathlib import Path
from typing import Optional

from . import noise as noise_mod
from .estimate1d import PenaltyConfig
from .simulate import CHAINS


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


CHAIN_KEYS = {
    "ar1": {"alpha": 0.5, "beta": 0.0, "sigma": 1.0},
    "ou": {"theta": -1.0, "sigma": 1.0, "tau": 1.0},
    "cir": {"theta": -1.0, "kappa": 2, "sigma0": 1.0, "tau": 1.0},
}
NOISE_KEYS = {
    "identity": {},
    "laplace": {},
    "gaussian": {"tau": None},
    "log_chisq": {},
    "user_table": {"path": None, "gamma": None, "s": 0.0, "b": 0.0},
}
SCALAR_KEYS = {
    "penalty.kappa1": float, "penalty.kappa2": float,
    "simulate.n": int, "simulate.seed": int,
    "study.n_list": "ints", "study.replicates": int, "study.base_seed": int,
    "study.threads": int, "study.grid_points": int, "study.timings": "bool",
    "transition.B": "interval", "transition.grid_points": int, "transition.restricted": str,
    "estimate.input": str,
    "calibrate.n": int, "calibrate.replicates": int, "calibrate.grid": "floats",
    "calibrate.threshold": float,
    "output.dir": str, "plot.render": "bool",
}


@dataclass
class ExperimentConfig:
    chain_kind: Optional[str] = None
    chain_params: dict = field(default_factory=dict)
    noise_kind: Optional[str] = None
    noise_params: dict = field(default_factory=dict)
    kappa1: float = 4.0
    kappa2: float = 4.0
    sim_n: Optional[int] = None
    sim_seed: int = 0
    n_list: tuple = ()
    replicates: int = 20
    base_seed: int = 0
    threads: int = 1
    grid_points: int = 1024
    timings: bool = False
    B: Optional[tuple] = None
    pi_grid: int = 101
    restricted: str = "auto"
    input_csv: Optional[str] = None
    cal_n: Optional[int] = None
    cal_replicates: int = 20
    cal_grid: tuple = tuple(2.0 ** k for k in range(-2, 6))
    cal_threshold: float = 0.9
    out_dir: str = "out"
    render: bool = True
    base_dir: Path = field(default=Path("."), repr=False)

    @property
    def penalty(self):
        return PenaltyConfig(self.kappa1, self.kappa2)

    def chain(self):
        if self.chain_kind is None:
            raise ConfigError("missing chain.kind")
        params = dict(CHAIN_KEYS[self.chain_kind])
        params.update(self.chain_params)
        if self.chain_kind == "ou":
            params["sigma_ou"] = params.pop("sigma")
        try:
            return CHAINS[self.chain_kind](**params)
        except ValueError as exc:
            raise ConfigError(f"chain: {exc}") from None

    def noise(self):
        if self.noise_kind is None:
            raise ConfigError("missing noise.kind")
        p = self.noise_params
        try:
            if self.noise_kind == "gaussian":
                return noise_mod.gaussian(p["tau"])
            if self.noise_kind == "user_table":
                path = self.resolve(p["path"])
                return noise_mod.read_cf_table(path, gamma=p["gamma"], s=p.get("s", 0.0),
                                               b=p.get("b", 0.0))
            return noise_mod.BUILTIN[self.noise_kind]()
        except (ValueError, OSError) as exc:
            raise ConfigError(f"noise: {exc}") from None

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _convert(key, raw, kind):
    try:
        if kind is int:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind is str:
            return raw
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return low in ("true", "1", "yes")
        if kind == "ints":
            return tuple(_convert(key, t.strip(), int) for t in raw.split(",") if t.strip())
        if kind == "floats":
            return tuple(_convert(key, t.strip(), float) for t in raw.split(",") if t.strip())
        if kind == "interval":
            if raw.strip().lower() == "auto":
                return None
            lo, hi = (_convert(key, t.strip(), float) for t in raw.split(","))
            return (lo, hi)
    except (ValueError, TypeError):
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    raise AssertionError(kind)


def parse_config(text, base_dir="."):
    """Parse and validate; raises ConfigError naming the offending line."""
    cfg = ExperimentConfig(base_dir=Path(base_dir))
    chain_raw, noise_raw = {}, {}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (t.strip() for t in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        seen.add(key)
        if key == "chain.kind":
            if raw not in CHAIN_KEYS:
                raise ConfigError(f"line {lineno}: unknown chain kind {raw!r}")
            cfg.chain_kind = raw
        elif key == "noise.kind":
            if raw not in NOISE_KEYS:
                raise ConfigError(f"line {lineno}: unknown noise kind {raw!r}")
            cfg.noise_kind = raw
        elif key.startswith("chain."):
            chain_raw[key[6:]] = (lineno, raw)
        elif key.startswith("noise."):
            noise_raw[key[6:]] = (lineno, raw)
        elif key in SCALAR_KEYS:
            _assign(cfg, key, _convert(key, raw, SCALAR_KEYS[key]))
        else:
            raise ConfigError(f"line {lineno}: unknown key {key}")
    _fill_params(cfg, chain_raw, noise_raw)
    validate(cfg)
    return cfg


def _fill_params(cfg, chain_raw, noise_raw):
    for raw_map, kind, table, label in ((chain_raw, cfg.chain_kind, CHAIN_KEYS, "chain"),
                                        (noise_raw, cfg.noise_kind, NOISE_KEYS, "noise")):
        if raw_map and kind is None:
            raise ConfigError(f"{label} parameters given without {label}.kind")
        allowed = table.get(kind, {})
        params = {}
        for name, (lineno, raw) in raw_map.items():
            if name not in allowed:
                raise ConfigError(f"line {lineno}: {label} kind {kind!r} has no parameter {name!r}")
            if name == "path":
                params[name] = raw
            elif name == "kappa":
                params[name] = _convert(f"{label}.{name}", raw, int)
            else:
                params[name] = _convert(f"{label}.{name}", raw, float)
        for name, default in allowed.items():
            if default is None and name not in params:
                raise ConfigError(f"missing {label}.{name} for kind {kind!r}")
        if label == "chain":
            cfg.chain_params = params
        else:
            cfg.noise_params = params


_FIELD = {
    "penalty.kappa1": "kappa1", "penalty.kappa2": "kappa2",
    "simulate.n": "sim_n", "simulate.seed": "sim_seed",
    "study.n_list": "n_list", "study.replicates": "replicates", "study.base_seed": "base_seed",
    "study.threads": "threads", "study.grid_points": "grid_points", "study.timings": "timings",
    "transition.B": "B", "transition.grid_points": "pi_grid", "transition.restricted": "restricted",
    "estimate.input": "input_csv",
    "calibrate.n": "cal_n", "calibrate.replicates": "cal_replicates", "calibrate.grid": "cal_grid",
    "calibrate.threshold": "cal_threshold",
    "output.dir": "out_dir", "plot.render": "render",
}


def _assign(cfg, key, value):
    setattr(cfg, _FIELD[key], value)


def validate(cfg):
    """Checks that do not depend on which command runs."""
    if not (cfg.kappa1 > 0 and cfg.kappa2 > 0):
        raise ConfigError("penalty constants must be positive")
    if cfg.sim_n is not None and cfg.sim_n < 1:
        raise ConfigError("simulate.n must be >= 1")
    for name in ("sim_seed", "base_seed"):
        if getattr(cfg, name) < 0:
            raise ConfigError("seeds must be non-negative")
    if cfg.n_list and (min(cfg.n_list) < 2 or list(cfg.n_list) != sorted(cfg.n_list)):
        raise ConfigError("study.n_list must be nondecreasing integers >= 2")
    if cfg.threads < 1:
        raise ConfigError("study.threads must be >= 1")
    if cfg.grid_points < 16 or cfg.pi_grid < 2:
        raise ConfigError("grid sizes too small")
    if cfg.B is not None and not cfg.B[0] < cfg.B[1]:
        raise ConfigError("transition.B must satisfy lo < hi")
    if cfg.restricted not in ("auto", "true", "false"):
        raise ConfigError("transition.restricted must be auto, true or false")
    if not 0 < cfg.cal_threshold <= 1:
        raise ConfigError("calibrate.threshold must be in (0, 1]")
    if not cfg.cal_grid or any(k <= 0 for k in cfg.cal_grid) or list(cfg.cal_grid) != sorted(cfg.cal_grid):
        raise ConfigError("calibrate.grid must be increasing positive values")
    # constructing the objects surfaces parameter-domain errors now
    if cfg.chain_kind is not None:
        cfg.chain()
    if cfg.noise_kind is not None:
        cfg.noise()
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)
