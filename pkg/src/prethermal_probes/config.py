"""
실험 설정: 기본값 ← YAML 파일 ← CLI 플래그 순으로 병합하고 한 번에 검증한다.
"""
import copy
from dataclasses import dataclass

import numpy as np
import yaml

from .dynamics import REDFIELD_VARIANTS
from .errors import ConfigError
from .probes import INITIAL_KINDS, MAX_LEVELS, MAX_QUASIDEGENERACY

EXPERIMENTS = ("dynamics", "fisher-sweep", "nlevel", "xi-bound", "spectrum")
SEED_LIMIT = 2**64

# --- 기본 설정 (ν=1, Δ=1e-4, γ=0.07, β=4 기준 프로브) ---
DEFAULT_CONFIG = {
    "experiment": "dynamics",
    "probe": {
        "nu": 1.0,
        "delta": 1.0e-4,
        "gamma": 0.07,
        "beta": 4.0,
        "beta_ambient": 2.5,
        "cluster_tol": None,
    },
    "initial": {
        "kinds": ["ground", "maximally-mixed", "ambient-thermal"],
        "custom": None,
    },
    "time_grid": {"start": 1.0e-2, "stop": 1.0e9, "points": 241, "spacing": "log"},
    "beta_grid": {"start": 0.5, "stop": 6.0, "points": 56, "spacing": "linear"},
    "dynamics": {"generator": "reduced", "variant": "unified"},
    "fisher": {"timescales": "numeric", "method": "analytic"},
    "nlevel": {"degeneracies": [1, 2, 3, 4], "variant": "unified", "fd_step": None,
               "time_grid": {"start": 1.0e-2, "stop": 1.0e10, "points": 121, "spacing": "log"},
               "beta_grid": {"start": 0.5, "stop": 6.0, "points": 12, "spacing": "linear"}},
    "sampling": {"n": 200000, "seed": 20240611, "mode": "uniform", "grid_bins": 60, "shard_size": 50000},
    "spectrum": {"probe": "v-model", "degeneracy": 2, "generator": "reduced", "variant": "unified"},
    "output": {"dir": "runs", "plots": False},
    "tolerances": {"closed_form": 1.0e-6, "trace": 1.0e-10, "positivity": 1.0e-8, "advantage": 1.0e3,
                   "fisher_agreement": 1.0e-6, "long_time": 1.0e-2, "plateau_spread": 5.0e-2},
    "threads": 1,
}


def load_config(config_path):
    """YAML 설정 파일 로드. 실패 시 None (사유 출력)."""
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            config = yaml.safe_load(f)
    except FileNotFoundError:
        print(f"Error: Configuration file '{config_path}' not found.")
        return None
    except yaml.YAMLError as e:
        print(f"Error parsing configuration file '{config_path}': {e}")
        return None
    if config is None:
        print(f"Error: Configuration file '{config_path}' is empty.")
        return None
    if not isinstance(config, dict):
        print(f"Error: Configuration file '{config_path}' must contain a mapping.")
        return None
    # 실행 manifest 도 설정 파일로 다시 읽을 수 있다
    if "manifest" in config and isinstance(config.get("config"), dict):
        return config["config"]
    return config


def deep_merge(base, override):
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@dataclass(frozen=True)
class ExperimentConfig:
    """검증된 설정. 섹션은 dict 로 유지 (manifest 에 그대로 기록)."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def experiment(self):
        return self.values["experiment"]

    def as_dict(self):
        return copy.deepcopy(self.values)


# --- 검증 ---
class _Checker:
    def __init__(self, config):
        self.config = config
        self.errors = []

    def fail(self, message):
        self.errors.append(message)

    def number(self, section, key, minimum=None, exclusive=True, allow_none=False, integer=False):
        value = self.config.get(section, {}).get(key) if section else self.config.get(key)
        label = f"{section}.{key}" if section else key
        if value is None and allow_none:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"{label} must be a number, got {value!r}")
            return None
        if integer and not float(value).is_integer():
            self.fail(f"{label} must be an integer, got {value!r}")
            return None
        if minimum is not None and (value <= minimum if exclusive else value < minimum):
            self.fail(f"{label} must be {'>' if exclusive else '>='} {minimum}, got {value!r}")
            return None
        return int(value) if integer else float(value)

    def choice(self, section, key, options):
        value = self.config.get(section, {}).get(key)
        if value not in options:
            self.fail(f"{section}.{key} must be one of {list(options)}, got {value!r}")
        return value

    def grid(self, label, grid):
        if not isinstance(grid, dict):
            self.fail(f"{label} must be a mapping")
            return
        start, stop, points = grid.get("start"), grid.get("stop"), grid.get("points")
        spacing = grid.get("spacing", "linear")
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (start, stop, points)):
            self.fail(f"{label} needs numeric start/stop/points, got {grid!r}")
            return
        if spacing not in ("log", "linear"):
            self.fail(f"{label}.spacing must be 'log' or 'linear', got {spacing!r}")
        if spacing == "log" and start <= 0:
            self.fail(f"{label}.start must be > 0 for a log grid, got {start}")
        if start < 0:
            self.fail(f"{label}.start must be >= 0, got {start}")
        if stop < start:
            self.fail(f"{label}.stop ({stop}) must be >= start ({start})")
        if points < 1 or not float(points).is_integer():
            self.fail(f"{label}.points must be a positive integer, got {points}")


def _unknown_keys(config, defaults, prefix=""):
    """defaults 에 없는 키를 점 표기 경로로 모은다 (기본값이 dict 인 섹션만 재귀)."""
    unknown = []
    for key, value in config.items():
        label = f"{prefix}{key}"
        if key not in defaults:
            unknown.append(label)
        elif isinstance(value, dict) and isinstance(defaults[key], dict):
            unknown.extend(_unknown_keys(value, defaults[key], f"{label}."))
    return unknown


def _validate(config):
    check = _Checker(config)
    unknown = _unknown_keys(config, DEFAULT_CONFIG)
    if unknown:
        check.fail(f"unknown configuration keys: {sorted(unknown)}")
    if config.get("experiment") not in EXPERIMENTS:
        check.fail(f"experiment must be one of {list(EXPERIMENTS)}, got {config.get('experiment')!r}")

    # probe
    nu = check.number("probe", "nu", 0)
    delta = check.number("probe", "delta", 0, exclusive=False)
    check.number("probe", "gamma", 0)
    check.number("probe", "beta", 0)
    check.number("probe", "beta_ambient", 0)
    cluster_tol = check.number("probe", "cluster_tol", 0, allow_none=True)
    if nu and delta is not None and delta / nu >= MAX_QUASIDEGENERACY:
        check.fail(f"probe.delta/probe.nu must be < {MAX_QUASIDEGENERACY}, got {delta / nu:g}")
    if cluster_tol is not None and delta is not None and cluster_tol <= delta:
        check.fail(f"probe.cluster_tol ({cluster_tol:g}) must exceed probe.delta ({delta:g})")
    effective_tol = cluster_tol if cluster_tol is not None else (100 * delta if delta else None)
    if nu and effective_tol is not None and effective_tol >= 0.5 * nu:
        source = "probe.cluster_tol" if cluster_tol is not None else "100·probe.delta"
        check.fail(f"{source} ({effective_tol:g}) must stay below probe.nu/2 ({0.5 * nu:g})")

    # initial
    kinds = config.get("initial", {}).get("kinds")
    if not isinstance(kinds, list) or not kinds:
        check.fail("initial.kinds must be a non-empty list")
    else:
        for kind in kinds:
            if kind not in INITIAL_KINDS:
                check.fail(f"initial.kinds entry {kind!r} is not one of {list(INITIAL_KINDS)}")
        if "custom" in kinds and not isinstance(config["initial"].get("custom"), dict):
            check.fail("initial.custom must give p2, p3, a, b, sigma0R when 'custom' is requested")

    check.grid("time_grid", config.get("time_grid"))
    check.grid("beta_grid", config.get("beta_grid"))
    if isinstance(config.get("beta_grid"), dict) and isinstance(config["beta_grid"].get("start"), (int, float)):
        if config["beta_grid"]["start"] <= 0:
            check.fail("beta_grid.start must be > 0")

    check.choice("dynamics", "generator", ("reduced", "redfield"))
    check.choice("dynamics", "variant", REDFIELD_VARIANTS)
    check.choice("fisher", "timescales", ("numeric", "lepe"))
    check.choice("fisher", "method", ("analytic", "numeric-sld"))

    # nlevel
    nlevel = config.get("nlevel", {})
    degeneracies = nlevel.get("degeneracies")
    if not isinstance(degeneracies, list) or not degeneracies:
        check.fail("nlevel.degeneracies must be a non-empty list")
    else:
        for n in degeneracies:
            if isinstance(n, bool) or not isinstance(n, int) or not 1 <= n <= MAX_LEVELS:
                dimension = f" (Liouvillian dimension {(n + 1) ** 2})" if isinstance(n, int) else ""
                check.fail(f"nlevel.degeneracies entry {n!r} must be an integer in [1, {MAX_LEVELS}]{dimension}")
    check.choice("nlevel", "variant", REDFIELD_VARIANTS)
    check.number("nlevel", "fd_step", 0, allow_none=True)
    check.grid("nlevel.time_grid", nlevel.get("time_grid"))
    check.grid("nlevel.beta_grid", nlevel.get("beta_grid"))
    nlevel_betas = nlevel.get("beta_grid")
    if isinstance(nlevel_betas, dict) and isinstance(nlevel_betas.get("start"), (int, float)):
        if nlevel_betas["start"] <= 0:
            check.fail("nlevel.beta_grid.start must be > 0")

    # sampling
    check.number("sampling", "n", 0, exclusive=False, integer=True)
    seed = check.number("sampling", "seed", 0, exclusive=False, integer=True)
    if seed is not None and seed >= SEED_LIMIT:
        check.fail(f"sampling.seed must fit in 64 bits, got {seed}")
    check.choice("sampling", "mode", ("uniform", "grid"))
    check.number("sampling", "grid_bins", 0, integer=True)
    check.number("sampling", "shard_size", 0, integer=True)

    check.choice("spectrum", "probe", ("v-model", "n-level", "qubit"))
    check.choice("spectrum", "generator", ("reduced", "redfield"))
    check.choice("spectrum", "variant", REDFIELD_VARIANTS)
    degeneracy = check.number("spectrum", "degeneracy", 0, integer=True)
    if degeneracy is not None and degeneracy > MAX_LEVELS:
        check.fail(f"spectrum.degeneracy must be <= {MAX_LEVELS}, got {degeneracy}")
    if config.get("spectrum", {}).get("generator") == "reduced" and config.get("spectrum", {}).get("probe") != "v-model":
        check.fail("spectrum.generator 'reduced' is only defined for the v-model probe")

    if not isinstance(config.get("output", {}).get("plots"), bool):
        check.fail("output.plots must be true or false")
    if not isinstance(config.get("output", {}).get("dir"), str):
        check.fail("output.dir must be a path string")
    for key in DEFAULT_CONFIG["tolerances"]:
        check.number("tolerances", key, 0)
    check.number(None, "threads", 0, integer=True)
    return check.errors


def resolve_config(raw=None, overrides=None):
    """
    기본값 ← raw ← overrides 병합 후 검증.

    Raises:
        ConfigError: 모든 위반 사항을 모아서 한 번에
    """
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    config = deep_merge(DEFAULT_CONFIG, raw or {})
    config = deep_merge(config, {k: v for k, v in (overrides or {}).items() if v is not None})
    errors = _validate(config)
    if errors:
        raise ConfigError(errors)
    for section, key in (("sampling", "n"), ("sampling", "seed"), ("sampling", "grid_bins"),
                         ("sampling", "shard_size"), ("spectrum", "degeneracy")):
        config[section][key] = int(config[section][key])
    config["threads"] = int(config["threads"])
    return ExperimentConfig(values=config)


def grid_values(grid):
    """{start, stop, points, spacing} → numpy 배열."""
    points = int(grid["points"])
    if grid.get("spacing", "linear") == "log":
        return np.logspace(np.log10(grid["start"]), np.log10(grid["stop"]), points)
    return np.linspace(float(grid["start"]), float(grid["stop"]), points)
