"""Experiment configuration: a single JSON document with exact rational strings.

Example::

    {
      "prime": 3,
      "atoms": [{"matrix": [["1/3", "0", "0"], ["0", "1", "0"], ["0", "0", "3"]],
                 "weight": "1"}],
      "symmetrize": false,
      "N": 2000, "M": 200, "seed": 7,
      "tol_exponent": 5, "germ_depth": 2
    }
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2

from . import padic
from .errors import ConfigError
from .walk import RNG_FAMILIES, MeasureSpec

SEED_ENV = "BTSL3_SEED"
_U64 = 1 << 64


@dataclass(frozen=True)
class ExperimentConfig:
    prime: int
    atoms: tuple
    symmetrize: bool = False
    N: int = 100
    M: int = 2
    seed: int = 0
    tol_exponent: int = 5
    germ_depth: int = 2
    depths: tuple = (1, 2, 3)
    walk_trajectories: int = 1
    bootstrap: int = 200
    near_radius: int = 3
    rng: str = "philox4x64"
    outputs: dict = field(default_factory=dict)

    def measure(self) -> MeasureSpec:
        return MeasureSpec(self.atoms, self.prime, self.seed, self.symmetrize, self.rng)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(**{**self.__dict__, "seed": _u64(seed, "seed")})


def _rational(x, where: str) -> Fraction:
    if isinstance(x, bool) or not isinstance(x, (str, int)):
        raise ConfigError(f"{where}: expected a rational string, got {x!r}")
    try:
        return Fraction(x)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: {x!r} is not a rational number") from exc


def _int(obj, key, default, minimum=None):
    v = obj.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key}: must be at least {minimum}, got {v}")
    return v


def _u64(v, where: str) -> int:
    try:
        v = int(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {v!r} is not an integer") from exc
    if not 0 <= v < _U64:
        raise ConfigError(f"{where}: {v} is not an unsigned 64-bit integer")
    return v


def parse_config(obj: dict) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    known = {
        "prime", "atoms", "symmetrize", "N", "M", "seed", "tol_exponent", "germ_depth",
        "depths", "walk_trajectories", "bootstrap", "near_radius", "rng", "outputs",
    }
    extra = set(obj) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    if "prime" not in obj or "atoms" not in obj:
        raise ConfigError("config needs 'prime' and 'atoms'")
    p = _int(obj, "prime", None, 2)
    if not gmpy2.is_prime(p):
        raise ConfigError(f"prime: {p} is not prime")
    atoms_in = obj["atoms"]
    if not isinstance(atoms_in, list) or not atoms_in:
        raise ConfigError("atoms: expected a nonempty list")
    atoms = []
    for i, a in enumerate(atoms_in):
        if not isinstance(a, dict) or "matrix" not in a:
            raise ConfigError(f"atoms[{i}]: expected an object with 'matrix'")
        rows = a["matrix"]
        if not (isinstance(rows, list) and len(rows) == 3 and all(isinstance(r, list) and len(r) == 3 for r in rows)):
            raise ConfigError(f"atoms[{i}].matrix: expected a 3x3 array")
        M = tuple(tuple(_rational(x, f"atoms[{i}].matrix") for x in r) for r in rows)
        if padic.det(M) != 1:
            raise ConfigError(f"atoms[{i}].matrix: determinant {padic.det(M)} is not 1")
        w = _rational(a.get("weight", "1"), f"atoms[{i}].weight")
        if w <= 0:
            raise ConfigError(f"atoms[{i}].weight: must be positive")
        atoms.append((M, w))
    depths = obj.get("depths", [1, 2, 3])
    if not (isinstance(depths, list) and depths and all(isinstance(k, int) and k >= 1 for k in depths)):
        raise ConfigError("depths: expected a nonempty list of positive integers")
    rng = obj.get("rng", "philox4x64")
    if rng not in RNG_FAMILIES:
        raise ConfigError(f"rng: unsupported generator family {rng!r}")
    sym = obj.get("symmetrize", False)
    if not isinstance(sym, bool):
        raise ConfigError("symmetrize: expected true or false")
    outputs = obj.get("outputs", {})
    if not isinstance(outputs, dict):
        raise ConfigError("outputs: expected an object")
    return ExperimentConfig(
        prime=p,
        atoms=tuple(atoms),
        symmetrize=sym,
        N=_int(obj, "N", 100, 1),
        M=_int(obj, "M", 2, 1),
        seed=_u64(obj.get("seed", 0), "seed"),
        tol_exponent=_int(obj, "tol_exponent", 5, 1),
        germ_depth=_int(obj, "germ_depth", 2, 1),
        depths=tuple(depths),
        walk_trajectories=_int(obj, "walk_trajectories", 1, 1),
        bootstrap=_int(obj, "bootstrap", 200, 2),
        near_radius=_int(obj, "near_radius", 3, 0),
        rng=rng,
        outputs=dict(outputs),
    )


def load_config(path, seed_override=None, env=None) -> ExperimentConfig:
    """Read a config file. Seed precedence: explicit override, then the
    BTSL3_SEED environment variable, then the file."""
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = parse_config(obj)
    env = os.environ if env is None else env
    if seed_override is not None:
        cfg = cfg.with_seed(seed_override)
    elif env.get(SEED_ENV):
        cfg = cfg.with_seed(env[SEED_ENV])
    return cfg


def config_to_json(cfg: ExperimentConfig) -> dict:
    return {
        "prime": cfg.prime,
        "atoms": [
            {"matrix": [[str(x) for x in row] for row in M], "weight": str(w)} for M, w in cfg.atoms
        ],
        "symmetrize": cfg.symmetrize,
        "N": cfg.N,
        "M": cfg.M,
        "seed": cfg.seed,
        "tol_exponent": cfg.tol_exponent,
        "germ_depth": cfg.germ_depth,
        "depths": list(cfg.depths),
        "walk_trajectories": cfg.walk_trajectories,
        "bootstrap": cfg.bootstrap,
        "near_radius": cfg.near_radius,
        "rng": cfg.rng,
    }
