"""Experiment configuration: TOML files with dotted-path overrides."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..geometry import DomainSpec, GeometryError
from ..growth import GrowthError, GrowthFunction

EXPERIMENTS = (
    "t1_check",
    "jump_check",
    "involution_check",
    "reproducing_check",
    "single_layer_identity",
    "riesz_characterization",
    "growth_analysis",
    "holder_fixtures",
    "ahlfors_profile",
    "hourglass",
)

OPERATOR_FOR = {
    "t1_check": {"double_layer", "cauchy_clifford"},
    "jump_check": {"double_layer", "cauchy_clifford"},
    "involution_check": {"cauchy_clifford"},
    "reproducing_check": {"cauchy_clifford"},
    "single_layer_identity": {"single_layer"},
    "riesz_characterization": {"riesz"},
}

FIELDS = ("harmonic", "planar_cauchy")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    domain: DomainSpec
    resolutions: tuple[int, ...]
    output_dir: Path
    omega: GrowthFunction | None = None
    operator: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)
    raw: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def content_hash(self) -> str:
        """sha256 of the canonical JSON form of the resolved configuration."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(tree: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Set leaves from ``a.b.c=value`` strings; values use TOML literal syntax."""
    tree = copy.deepcopy(tree)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        if not all(parts):
            raise ConfigError(f"bad override key {key!r}")
        node = tree
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-table value")
        node[parts[-1]] = _parse_value(value.strip())
    return tree


def load_tree(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def load_config(path: str | Path, overrides: list[str] | None = None) -> ExperimentConfig:
    return build_config(apply_overrides(load_tree(path), overrides or []))


_TOP_KEYS = {"experiment", "domain", "resolutions", "output_dir", "omega", "operator", "seed", "params"}


def build_config(tree: dict[str, Any]) -> ExperimentConfig:
    unknown = set(tree) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    exp = tree.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
    try:
        domain = DomainSpec.from_dict(tree.get("domain", {"kind": "disk"}))
    except (GeometryError, TypeError) as exc:
        raise ConfigError(f"invalid domain: {exc}") from exc
    omega = None
    if "omega" in tree:
        try:
            omega = GrowthFunction.from_dict(tree["omega"])
        except (GrowthError, TypeError, KeyError) as exc:
            raise ConfigError(f"invalid omega: {exc}") from exc
    res = tree.get("resolutions", [])
    if not isinstance(res, list) or not all(isinstance(r, int) and r >= 16 for r in res):
        raise ConfigError("resolutions must be a list of integers >= 16")
    if any(b <= a for a, b in zip(res, res[1:])):
        raise ConfigError("resolutions must be strictly increasing")
    seed = tree.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    operator = dict(tree.get("operator", {}))
    params = dict(tree.get("params", {}))
    cfg = ExperimentConfig(
        experiment=exp,
        domain=domain,
        resolutions=tuple(res),
        output_dir=Path(tree.get("output_dir", f"out/{exp}")),
        omega=omega,
        operator=operator,
        seed=seed,
        params=params,
        raw=tree,
    )
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Experiment, operator and domain compatibility."""
    exp = cfg.experiment
    kind = cfg.operator.get("kind")
    allowed = OPERATOR_FOR.get(exp)
    if allowed is not None:
        if kind is None:
            raise ConfigError(f"{exp} needs operator.kind in {sorted(allowed)}")
        if kind not in allowed:
            raise ConfigError(f"{exp} is incompatible with operator {kind!r}; allowed: {sorted(allowed)}")
    elif kind is not None:
        raise ConfigError(f"{exp} takes no operator")
    side = cfg.operator.get("side", "interior")
    if side not in ("interior", "exterior"):
        raise ConfigError("operator.side must be interior or exterior")
    fld = cfg.operator.get("field", "harmonic")
    if fld not in FIELDS:
        raise ConfigError(f"operator.field must be one of {FIELDS}")
    if fld == "planar_cauchy" and cfg.domain.dim != 2:
        raise ConfigError("the planar Cauchy field needs a planar domain")
    needs_res = exp not in ("growth_analysis", "jump_check")
    if needs_res and not cfg.resolutions:
        raise ConfigError(f"{exp} needs at least one resolution")
    if exp in ("jump_check", "involution_check", "riesz_characterization") and cfg.domain.dim != 2:
        raise ConfigError(f"{exp} is implemented for planar domains")
    if exp in ("involution_check", "jump_check") and not cfg.domain.smooth:
        raise ConfigError(f"{exp} needs a smooth domain")
    if exp in ("growth_analysis", "holder_fixtures", "hourglass") and cfg.omega is None:
        raise ConfigError(f"{exp} needs an omega table")
    if cfg.domain.kind == "teardrop" and any(r % 2 for r in cfg.resolutions):
        raise ConfigError("teardrop resolutions must be even")
    if exp == "hourglass":
        for key in ("a", "b"):
            v = cfg.params.get(key)
            if not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
                raise ConfigError(f"hourglass needs a positive params.{key}")
