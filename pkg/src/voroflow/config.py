"""Flat key = value configuration files and the resolved SceneConfig."""

from dataclasses import dataclass, fields

import numpy as np


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class RangeError(ConfigError):
    pass


SCENES = (
    "taylor_green", "taylor_vortex_pair", "leapfrog",
    "hydrostatic_pool", "droplet_pool", "dam_break",
)
MODES = ("base", "boundary", "baseline")


@dataclass
class SceneConfig:
    scene: str = "taylor_green"
    mode: str = "base"
    steps: int = 100
    spacing: float = 0.03125
    dt: float = 0.005
    adaptive_dt: bool = False
    cfl: float = 0.5
    dt_max: float = 0.01
    reinit_period: int = 20
    k_layers: int = 0
    gravity_x: float = 0.0
    gravity_y: float = 0.0
    lloyd_strength: float = 1.0
    sticky_flags: bool = True
    naive_boundary: bool = False
    pressure_scaling: str = "pressure"   # "pressure" or "lambda"
    jacobian_mode: str = "ls"            # "ls" or "ode"
    cg_tol: float = 1e-8
    cg_max_iter: int = 0                 # 0 means 10 x cell count
    frame_every: int = 0                 # 0 means first and last frame only
    out: str = "out"
    seed: int = 0
    threads: int = 0
    timing: bool = True                  # write real wall_ms; 0 writes zeros
    box_width: float = 0.0               # 0 means scene default
    box_height: float = 0.0
    u0: float = 1.0
    vortex_u: float = 1.0
    vortex_a: float = 0.3
    vortex_sep: float = 0.815
    leapfrog_gamma: float = 1.2
    leapfrog_sigma: float = 0.12
    leapfrog_x: float = 0.7
    leapfrog_gap: float = 0.4     # vertical half-gap of each pair
    leapfrog_offset: float = 0.5  # horizontal separation between the pairs
    pool_height: float = 0.5
    droplet_radius: float = 0.1
    droplet_x: float = 0.5
    droplet_y: float = 0.7
    droplet_speed: float = 2.0
    dam_fraction: float = 0.35
    dam_height: float = 0.6
    wall_layers: int = 1
    band_width_factor: float = 2.0


_BOOL_KEYS = {"adaptive_dt", "sticky_flags", "naive_boundary", "timing"}
_FIELD_TYPES = {f.name: f.type for f in fields(SceneConfig)}

# scene-dependent defaults applied to keys the file leaves unset
_SCENE_DEFAULTS = {
    "taylor_green": {"mode": "base", "box_width": 2.0, "box_height": 2.0,
                     "dt": 0.002},
    "taylor_vortex_pair": {"mode": "base", "box_width": 2.5, "box_height": 2.5,
                           "spacing": 2.5 / 64, "dt": 0.01},
    "leapfrog": {"mode": "base", "box_width": 4.0, "box_height": 2.0,
                 "spacing": 1.0 / 32, "dt": 0.005},
    # gravity scenes run a gentle Lloyd pull: full-strength centroid snapping
    # couples with the hydrostatic pressure into a slow geometric instability
    "hydrostatic_pool": {"mode": "boundary", "box_width": 1.0,
                         "box_height": 1.0, "spacing": 0.025, "dt": 0.002,
                         "gravity_y": -9.81, "lloyd_strength": 0.1},
    "droplet_pool": {"mode": "boundary", "box_width": 1.0, "box_height": 1.0,
                     "spacing": 0.025, "dt": 0.002, "gravity_y": -9.81,
                     "lloyd_strength": 0.1},
    "dam_break": {"mode": "boundary", "box_width": 2.0, "box_height": 1.0,
                  "spacing": 0.025, "dt": 0.002, "gravity_y": -9.81,
                  "lloyd_strength": 0.1},
}


def _convert(key, raw, lineno):
    typ = _FIELD_TYPES[key]
    try:
        if key in _BOOL_KEYS:
            if raw in ("1", "true", "yes", "on"):
                return True
            if raw in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ParseError(f"line {lineno}: cannot parse value {raw!r} for "
                         f"key {key!r}") from None


def _validate(cfg):
    def check(cond, msg):
        if not cond:
            raise RangeError(msg)

    check(cfg.scene in SCENES, f"unknown scene {cfg.scene!r}")
    check(cfg.mode in MODES, f"unknown mode {cfg.mode!r}")
    check(cfg.steps >= 0, "steps must be >= 0")
    check(cfg.spacing > 0, "spacing must be > 0")
    check(cfg.dt > 0, "dt must be > 0")
    check(cfg.dt_max > 0, "dt_max must be > 0")
    check(cfg.cfl > 0, "cfl must be > 0")
    check(cfg.reinit_period >= 1, "reinit_period must be >= 1")
    check(0 <= cfg.k_layers <= 4, "k_layers must be in 0..4")
    check(0.0 <= cfg.lloyd_strength <= 1.0, "lloyd_strength must be in [0, 1]")
    check(cfg.pressure_scaling in ("pressure", "lambda"),
          "pressure_scaling must be 'pressure' or 'lambda'")
    check(cfg.jacobian_mode in ("ls", "ode"),
          "jacobian_mode must be 'ls' or 'ode'")
    check(cfg.cg_tol > 0, "cg_tol must be > 0")
    check(cfg.cg_max_iter >= 0, "cg_max_iter must be >= 0")
    check(cfg.frame_every >= 0, "frame_every must be >= 0")
    check(cfg.threads >= 0, "threads must be >= 0")
    check(cfg.box_width >= 0, "box_width must be >= 0")
    check(cfg.box_height >= 0, "box_height must be >= 0")
    check(cfg.wall_layers >= 1, "wall_layers must be >= 1")
    check(cfg.band_width_factor > 0, "band_width_factor must be > 0")
    check(cfg.vortex_a > 0, "vortex_a must be > 0")
    check(cfg.leapfrog_sigma > 0, "leapfrog_sigma must be > 0")
    check(cfg.leapfrog_gap > 0, "leapfrog_gap must be > 0")
    check(cfg.leapfrog_offset > 0, "leapfrog_offset must be > 0")
    check(0 < cfg.dam_fraction < 1, "dam_fraction must be in (0, 1)")


def parse_config(path, overrides=None):
    """Parse a flat key = value file; CLI overrides win over file values."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ParseError(f"line {lineno}: expected 'key = value', "
                                 f"got {body!r}")
            key, _, raw = body.partition("=")
            key = key.strip()
            raw = raw.strip()
            if not key or not raw:
                raise ParseError(f"line {lineno}: empty key or value")
            if key not in _FIELD_TYPES:
                raise UnknownKey(f"line {lineno}: unknown key {key!r}")
            if key in entries:
                raise ParseError(f"line {lineno}: duplicate key {key!r}")
            entries[key] = _convert(key, raw, lineno)

    if overrides:
        for key, val in overrides.items():
            if val is None:
                continue
            if key not in _FIELD_TYPES:
                raise UnknownKey(f"unknown override key {key!r}")
            entries[key] = val

    scene = entries.get("scene", SceneConfig.scene)
    merged = dict(_SCENE_DEFAULTS.get(scene, {}))
    merged.update(entries)
    cfg = SceneConfig(**merged)
    _validate(cfg)
    return cfg


def default_config(scene, **overrides):
    """SceneConfig with the scene's defaults applied, then overrides."""
    merged = dict(_SCENE_DEFAULTS.get(scene, {}))
    merged["scene"] = scene
    for key, val in overrides.items():
        if key not in _FIELD_TYPES:
            raise UnknownKey(f"unknown key {key!r}")
        merged[key] = val
    cfg = SceneConfig(**merged)
    _validate(cfg)
    return cfg


def resolve_box(cfg):
    """Domain box (xmin, ymin, xmax, ymax) after scene defaults."""
    w = cfg.box_width
    h = cfg.box_height
    if w == 0.0 or h == 0.0:
        d = _SCENE_DEFAULTS[cfg.scene]
        w = w or d["box_width"]
        h = h or d["box_height"]
    return np.array([0.0, 0.0, w, h])


def format_resolved(cfg):
    """Config echo for the audit trail, one key per line, sorted."""
    lines = []
    for f in sorted(fields(SceneConfig), key=lambda f: f.name):
        val = getattr(cfg, f.name)
        if isinstance(val, bool):
            val = int(val)
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
