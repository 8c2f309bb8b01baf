"""Scenario configuration (TOML), run records and CSV/JSON output helpers.

Configs are schema-validated before execution and unknown keys are
rejected with the offending key path.  A master seed expands to per-use
seeds through a counter-based SeedSequence splitter; the expansion rule and
the kernel backend are recorded in the run manifest so a run can be
reproduced bit-for-bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import kernels
from .errors import ConfigError
from .models import EntropyModel, MacroState, model_from_config

SCHEMA_VERSION = 1
OUTPUT_ROOT_ENV = "THERMOECON_OUT"

EXPERIMENTS = (
    "stationary", "price-search", "join", "thermometer", "carnot",
    "edgeworth", "gains", "derivatives", "reconstruct", "onsager",
    "fluctuations",
)

_TOP_KEYS = {"schema_version", "experiment", "seed", "mode", "out",
             "replicas", "steps", "economy", "params"}
_ECONOMY_KEYS = {"name", "money", "goods", "model", "n_agents"}


@dataclass
class EconomySpec:
    name: str
    money: float
    goods: np.ndarray
    model_cfg: dict

    def build_model(self) -> EntropyModel:
        return model_from_config(dict(self.model_cfg))

    def initial_state(self) -> MacroState:
        return MacroState(self.money, self.goods)


@dataclass
class ScenarioConfig:
    experiment: str
    seed: int = 0
    mode: str = "analytic"
    out: Optional[str] = None
    replicas: int = 1
    steps: Optional[int] = None
    economies: List[EconomySpec] = field(default_factory=list)
    params: Dict[str, Any] = field(default_factory=dict)
    raw: Dict[str, Any] = field(default_factory=dict)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(canon).hexdigest()[:16]

    def seed_for(self, label: str, index: int = 0) -> int:
        """Counter-based splitter: (master seed, stable label hash, index)."""
        h = int.from_bytes(hashlib.sha256(label.encode()).digest()[:4], "big")
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(h, index))
        return int(ss.generate_state(1)[0] & 0x7FFFFFFF)


def _reject_unknown(mapping: dict, allowed: set, where: str):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def validate_config(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    _reject_unknown(data, _TOP_KEYS, "top level")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    exp = data.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment: {exp!r} is not one of {EXPERIMENTS}")
    mode = data.get("mode", "analytic")
    if mode not in ("analytic", "stochastic"):
        raise ConfigError(f"mode: {mode!r} is not 'analytic' or 'stochastic'")
    economies = []
    for k, econ in enumerate(data.get("economy", [])):
        where = f"economy[{k}]"
        if not isinstance(econ, dict):
            raise ConfigError(f"{where}: must be a table")
        _reject_unknown(econ, _ECONOMY_KEYS, where)
        for key in ("name", "money", "goods", "model"):
            if key not in econ:
                raise ConfigError(f"{where}: missing required key {key!r}")
        spec = EconomySpec(str(econ["name"]), float(econ["money"]),
                           np.atleast_1d(np.asarray(econ["goods"], dtype=float)),
                           dict(econ["model"]))
        spec.build_model()          # validates model keys now, not at run time
        economies.append(spec)
    names = [e.name for e in economies]
    if len(set(names)) != len(names):
        raise ConfigError("economy names must be unique")
    return ScenarioConfig(
        experiment=exp,
        seed=int(data.get("seed", 0)),
        mode=mode,
        out=data.get("out"),
        replicas=int(data.get("replicas", 1)),
        steps=None if data.get("steps") is None else int(data["steps"]),
        economies=economies,
        params=dict(data.get("params", {})),
        raw=data,
    )


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from None
    return validate_config(data)


def config_schema() -> dict:
    """Machine-readable description of the accepted config keys."""
    return {
        "schema_version": SCHEMA_VERSION,
        "top_level": sorted(_TOP_KEYS),
        "experiments": list(EXPERIMENTS),
        "modes": ["analytic", "stochastic"],
        "economy": sorted(_ECONOMY_KEYS),
        "model_kinds": ["cobb-douglas", "pure-money", "coupled-test",
                        "perfect-substitutes", "two-pure-currency", "tabulated"],
        "env": {OUTPUT_ROOT_ENV: "default output root directory"},
        "exit_codes": {"0": "success", "1": "error", "2": "assertion failure"},
    }


# ---------------------------------------------------------------------------
# Run records and output helpers
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    run_id: str
    experiment: str
    config_hash: str
    seed: int
    mode: str
    backend: str
    started: float
    finished: float = 0.0
    files: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    assertions: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "mode": self.mode,
            "kernel_backend": self.backend,
            "started_unix": self.started,
            "finished_unix": self.finished,
            "files": self.files,
            "summary": self.summary,
            "assertions": self.assertions,
            "seed_splitter": "SeedSequence(entropy=seed, spawn_key=(sha256(label)[:4], index))",
        }


def new_run_record(cfg: ScenarioConfig) -> RunRecord:
    return RunRecord(
        run_id=f"{cfg.experiment}-{cfg.config_hash()}-{cfg.seed}",
        experiment=cfg.experiment,
        config_hash=cfg.config_hash(),
        seed=cfg.seed,
        mode=cfg.mode,
        backend=kernels.backend_name(),
        started=time.time(),
    )


def resolve_outdir(cfg: ScenarioConfig, cli_out: Optional[str]) -> Path:
    root = cli_out or cfg.out or os.environ.get(OUTPUT_ROOT_ENV, "runs")
    out = Path(root)
    if cli_out is None and cfg.out is None:
        out = out / f"{cfg.experiment}-{cfg.config_hash()}-{cfg.seed}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_csv(path: Path, header: Sequence[str], rows) -> str:
    """Deterministic CSV: floats via repr (shortest round-trip)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                        else v for v in row])
    return str(path)


def write_json(path: Path, payload: dict) -> str:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return str(path)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")
