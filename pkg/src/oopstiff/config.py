"""Pipeline configuration (INI-style key/value sections).

Example::

    [space]
    preset = reduced          ; or: file = my_space.cfg, or inline [parameter X] sections

    [oracle]
    kind = synthetic          ; synthetic | dataset | external
    ; path = results.csv     ; required for kind = dataset

    [sampling]
    n = 800
    skip = 1
    seed = 0

    [retry]
    max_retries = 5
    perturb_scale = 0.02

    [split]
    train_fraction = 0.8
    seed = 0

    [kernel]
    kind = thin_plate
    smoothing = 0

    [target]
    total_angle = 150         ; degrees, or give theta = 1.5 directly
    gripper_units = 7
    model_units = 4

    [optimizer]
    epsilon = 1.0
    max_iter = 200
    max_line_search = 40
    starts = 1
    seed = 0

    [surface]
    params = H_C W_B
    resolution = 50
    fixed = T_A:1.5 L_A:6.0

    [sensitivity]
    preset = full
    keep = 4
    degree = 4
    points = 9

    [learning_curve]
    sizes = 200 800 2400 5400

    [metadata]
    pressure = 100 kPa        ; copied verbatim into dataset headers
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .design_space import DesignSpace, full_space, load_space, reduced_space, space_from_config
from .evaluation import SplitSpec
from .exceptions import ConfigError
from .optimization import OptimizerSettings, target_angle
from .oracle import RetryPolicy
from .surrogate import KernelSpec

PRESETS = {"reduced": reduced_space, "full": full_space}


@dataclass
class PipelineConfig:
    space: DesignSpace = field(default_factory=reduced_space)
    oracle_kind: str = "synthetic"
    dataset_path: Path | None = None
    n: int = 800
    skip: int = 1
    sample_seed: int = 0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    split: SplitSpec = field(default_factory=SplitSpec)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    theta_target: float = target_angle(150.0, 7, 4)
    epsilon: float = 1.0
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    starts: int = 1
    optimizer_seed: int = 0
    surface_params: tuple = ("H_C", "W_B")
    surface_resolution: int = 50
    surface_fixed: dict = field(default_factory=dict)
    sensitivity_space: DesignSpace = field(default_factory=full_space)
    sensitivity_dataset: Path | None = None
    keep: int = 4
    degree: int = 4
    sweep_points: int = 9
    run_sensitivity: bool = False
    learning_sizes: tuple = (200, 800, 2400, 5400)
    metadata: dict = field(default_factory=dict)

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, sample_seed=seed, split=replace(self.split, seed=seed), optimizer_seed=seed)


def _int(sec, key, default, minimum=None):
    try:
        v = sec.getint(key, fallback=default)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected an integer") from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"[{sec.name}] {key}: must be >= {minimum}")
    return v


def _float(sec, key, default):
    try:
        return sec.getfloat(key, fallback=default)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected a number") from None


def _pairs(text):
    out = {}
    for tok in text.split():
        k, sep, v = tok.partition(":")
        if not sep:
            raise ConfigError(f"expected name:value, got {tok!r}")
        out[k] = float(v)
    return out


def _space_section(cp, name, base: Path, default):
    if not cp.has_section(name):
        return default()
    sec = cp[name]
    if "file" in sec:
        p = Path(sec["file"])
        return load_space(p if p.is_absolute() else base / p)
    preset = sec.get("preset", "").strip()
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"[{name}] unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        return PRESETS[preset]()
    return default()


def parse_config(text: str, base_dir=".") -> PipelineConfig:
    base = Path(base_dir)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for s in ("oracle", "sampling", "retry", "split", "kernel", "target", "optimizer", "surface",
              "sensitivity", "learning_curve", "metadata"):
        if not cp.has_section(s):
            cp.add_section(s)
    cfg = PipelineConfig()
    if any(s.startswith("parameter ") for s in cp.sections()):
        cfg.space = space_from_config(cp)
    else:
        cfg.space = _space_section(cp, "space", base, reduced_space)

    o = cp["oracle"]
    cfg.oracle_kind = o.get("kind", "synthetic").strip()
    if cfg.oracle_kind not in ("synthetic", "dataset", "external"):
        raise ConfigError(f"[oracle] kind must be synthetic, dataset or external, got {cfg.oracle_kind!r}")
    if "path" in o:
        p = Path(o["path"])
        cfg.dataset_path = p if p.is_absolute() else base / p
    if cfg.oracle_kind == "dataset":
        if cfg.dataset_path is None:
            raise ConfigError("[oracle] kind = dataset requires path")
        if not cfg.dataset_path.is_file():
            raise FileNotFoundError(f"dataset not found: {cfg.dataset_path}")

    s = cp["sampling"]
    cfg.n = _int(s, "n", cfg.n, 1)
    cfg.skip = _int(s, "skip", cfg.skip, 0)
    cfg.sample_seed = _int(s, "seed", 0)
    r = cp["retry"]
    cfg.retry = RetryPolicy(_int(r, "max_retries", 5, 0), _float(r, "perturb_scale", 0.02))
    sp = cp["split"]
    cfg.split = SplitSpec(_float(sp, "train_fraction", 0.8), _int(sp, "seed", 0))
    k = cp["kernel"]
    cfg.kernel = KernelSpec(k.get("kind", "thin_plate").strip(), _float(k, "smoothing", 0.0))

    t = cp["target"]
    if "theta" in t:
        cfg.theta_target = _float(t, "theta", None)
    else:
        cfg.theta_target = target_angle(_float(t, "total_angle", 150.0), _int(t, "gripper_units", 7, 1),
                                        _int(t, "model_units", 4, 1))
    op = cp["optimizer"]
    cfg.epsilon = _float(op, "epsilon", 1.0)
    if not cfg.epsilon > 0:
        raise ConfigError("[optimizer] epsilon must be positive")
    cfg.optimizer = OptimizerSettings(max_iter=_int(op, "max_iter", 200, 1),
                                      max_line_search=_int(op, "max_line_search", 40, 1))
    cfg.starts = _int(op, "starts", 1, 1)
    cfg.optimizer_seed = _int(op, "seed", 0)

    su = cp["surface"]
    params = tuple(su.get("params", "H_C W_B").split())
    if len(params) != 2:
        raise ConfigError("[surface] params needs exactly two parameter names")
    cfg.surface_params = params
    cfg.surface_resolution = _int(su, "resolution", 50, 2)
    cfg.surface_fixed = _pairs(su.get("fixed", ""))

    se = cp["sensitivity"]
    cfg.run_sensitivity = len(se) > 0
    cfg.sensitivity_space = _space_section(cp, "sensitivity", base, full_space)
    if "dataset" in se:
        p = Path(se["dataset"])
        cfg.sensitivity_dataset = p if p.is_absolute() else base / p
    cfg.keep = _int(se, "keep", 4, 1)
    cfg.degree = _int(se, "degree", 4, 0)
    cfg.sweep_points = _int(se, "points", 9, 2)

    lc = cp["learning_curve"]
    try:
        cfg.learning_sizes = tuple(int(v) for v in lc.get("sizes", "200 800 2400 5400").split())
    except ValueError:
        raise ConfigError("[learning_curve] sizes must be integers") from None
    cfg.metadata = dict(cp["metadata"])
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config not found: {path}")
    return parse_config(path.read_text(), path.parent)
