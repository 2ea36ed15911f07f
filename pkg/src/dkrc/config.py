"""Run configuration: flat ``section.key = value`` text files with defaults.

Every key has a default, so an empty file is a valid config; unknown keys
are rejected by name. The same flat format is echoed into output
directories for provenance.
"""

import dataclasses
from dataclasses import dataclass, field

from .errors import DataFormatError


@dataclass
class RunSection:
    seed: int = 0


@dataclass
class EnvSection:
    name: str = "pendulum"


@dataclass
class PendulumSection:
    m: float = 1.0
    l: float = 1.0
    g: float = 10.0
    gamma: float = 0.05
    dt: float = 0.05
    max_speed: float = 8.0
    max_torque: float = 2.0


@dataclass
class LanderSection:
    main_accel: float = 30.0
    side_accel: float = 3.0
    side_torque: float = 3.0
    gravity: float = 10.0
    dt: float = 0.02
    ground: float = 4.0


@dataclass
class DataSection:
    episodes: int = 5
    steps: int = 375
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    ou_mu: float = 0.0
    ou_dt: float = 1.0
    train_frac: float = 0.7
    val_frac: float = 0.15
    test_frac: float = 0.15


@dataclass
class NetSection:
    hidden: int = 32
    depth: int = 4
    lift: int = 0  # 0 = auto (20 for pendulum, 30 for lander)


@dataclass
class TrainSection:
    epochs: int = 300
    batch: int = 64
    blend: float = 0.5
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rank_tol: float = 1e-9
    smooth_rank: bool = False
    constrained_c: bool = True


@dataclass
class ControlSection:
    method: str = "auto"  # auto: mpc for pendulum, lqr for lander
    q: float = 1.0        # state weight scale (Q = q * I)
    r: float = 0.1        # control weight scale (R = r * I)
    horizon: int = 30
    games: int = 10
    game_steps: int = 400
    mpc_tol: float = 1e-8
    mpc_max_iter: int = 10000
    dare_tol: float = 1e-10
    dare_max_iter: int = 10000


@dataclass
class AnalysisSection:
    grid: int = 61
    top_k: int = 4
    pend_angle: float = 0.2
    pend_speed: float = 0.5
    pend_window: int = 20
    lander_x: float = 1.0
    lander_y: float = 0.5
    lander_theta: float = 0.2
    lander_speed: float = 1.0


@dataclass
class PathsSection:
    dataset: str = "dataset.csv"
    model: str = "model.txt"
    report: str = "train_report.csv"


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    env: EnvSection = field(default_factory=EnvSection)
    pendulum: PendulumSection = field(default_factory=PendulumSection)
    lander: LanderSection = field(default_factory=LanderSection)
    data: DataSection = field(default_factory=DataSection)
    net: NetSection = field(default_factory=NetSection)
    train: TrainSection = field(default_factory=TrainSection)
    control: ControlSection = field(default_factory=ControlSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    paths: PathsSection = field(default_factory=PathsSection)


def flat_items(cfg: RunConfig):
    """All (dotted key, value) pairs in declaration order."""
    for sec_field in dataclasses.fields(cfg):
        section = getattr(cfg, sec_field.name)
        for f in dataclasses.fields(section):
            yield f"{sec_field.name}.{f.name}", getattr(section, f.name)


def _parse_value(raw: str, like) -> object:
    if isinstance(like, bool):
        low = raw.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw.strip()


def set_key(cfg: RunConfig, key: str, raw: str, where: str = "") -> None:
    """Assign one dotted key; rejects unknown keys by name."""
    section_name, _, field_name = key.partition(".")
    prefix = f"{where}: " if where else ""
    if not field_name or not hasattr(cfg, section_name):
        raise DataFormatError(f"{prefix}unknown config key {key!r}")
    section = getattr(cfg, section_name)
    if not dataclasses.is_dataclass(section) or not hasattr(section, field_name):
        raise DataFormatError(f"{prefix}unknown config key {key!r}")
    current = getattr(section, field_name)
    try:
        setattr(section, field_name, _parse_value(raw, current))
    except ValueError as exc:
        raise DataFormatError(f"{prefix}bad value for {key!r}: {exc}") from exc


def load_config(path) -> RunConfig:
    cfg = RunConfig()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            key, sep, raw = stripped.partition("=")
            if not sep:
                raise DataFormatError(f"{path}: line {lineno}: expected 'key = value'")
            set_key(cfg, key.strip(), raw.strip(), where=f"{path}: line {lineno}")
    return cfg


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        for key, val in flat_items(cfg):
            fh.write(f"{key} = {_fmt_value(val)}\n")


def lift_dim(cfg: RunConfig) -> int:
    if cfg.net.lift > 0:
        return cfg.net.lift
    return 20 if cfg.env.name == "pendulum" else 30
