"""Flat ``section.key = value`` configuration files.

Values may carry a ``dB`` suffix (converted to a linear ratio) or a ``dBm``
suffix (converted to watts). Lists are comma separated. Environment
variables ``IRSOPT_<SECTION>__<KEY>`` override file values, and explicit
overrides (from command-line flags) win over both.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

from .channels import ScenarioConfig, db_to_linear, dbm_to_watts
from .harness import ALGORITHMS, ExperimentSpec, PowerModel

ENV_PREFIX = "IRSOPT_"
_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_UNIT = re.compile(rf"^\s*({_NUMBER})\s*(dBm|dB)?\s*$")

_INT_KEYS = {"scenario.nt", "scenario.k", "scenario.seed", "algo.max_outer", "algo.sdr_budget",
             "experiment.drops", "experiment.workers"}
_LIST_KEYS = {"scenario.irs_elements", "experiment.sweep_values", "experiment.algorithms",
              "experiment.thresholds"}
_TEXT_KEYS = {"algo.name", "experiment.sweep_var", "experiment.algorithms"}
_SCENARIO_KEYS = {f.name for f in fields(ScenarioConfig)} - {"irs_positions", "ap_position",
                                                               "mu", "robust_mu", "eps"}
KNOWN_KEYS = (
    {f"scenario.{k}" for k in _SCENARIO_KEYS}
    | {"algo.name", "algo.mu", "algo.robust_mu", "algo.eps", "algo.max_outer", "algo.sdr_budget"}
    | {"experiment.sweep_var", "experiment.sweep_values", "experiment.algorithms",
       "experiment.drops", "experiment.thresholds", "experiment.workers"}
    | {f"power.{k}" for k in ("eta", "ps", "prf", "pirs")}
)


class ConfigError(ValueError):
    """Malformed configuration; the message names the line or field."""


def parse_number(text: str, where: str) -> float:
    m = _UNIT.match(text)
    if not m:
        raise ConfigError(f"{where}: cannot read {text!r} as a number (optional dB/dBm suffix)")
    value, unit = float(m.group(1)), m.group(2)
    if unit == "dB":
        return float(db_to_linear(value))
    if unit == "dBm":
        return float(dbm_to_watts(value))
    return value


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw ``key -> value`` strings; later lines override earlier ones."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        raw[key] = value
    return raw


def env_overrides(environ=None, prefix: str = ENV_PREFIX) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(prefix) or "__" not in name:
            continue
        section, key = name[len(prefix):].lower().split("__", 1)
        dotted = f"{section}.{key}"
        if dotted not in KNOWN_KEYS:
            raise ConfigError(f"environment variable {name}: unknown key {dotted!r}")
        out[dotted] = value
    return out


def default_text() -> str:
    return resources.files("irsopt").joinpath("data/default.cfg").read_text()


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    algorithm: str = "penalty-altmin"
    max_outer: int = 200
    sdr_budget: int | None = None
    sweep_var: str = "gamma_db"
    sweep_values: tuple = (2.0,)
    algorithms: tuple[str, ...] = ("penalty-altmin",)
    drops: int = 20
    thresholds_db: tuple[float, ...] = ()
    workers: int = 1
    power: PowerModel = field(default_factory=PowerModel)

    def experiment(self) -> ExperimentSpec:
        return ExperimentSpec(
            scenario=self.scenario, sweep_var=self.sweep_var, sweep_values=self.sweep_values,
            algorithms=self.algorithms, drops=self.drops, thresholds_db=self.thresholds_db,
            power_model=self.power, max_outer=self.max_outer, sdr_budget=self.sdr_budget,
            workers=self.workers)

    def canonical(self) -> dict:
        """Every numerically relevant field, in a stable JSON-friendly form."""
        d = asdict(self)
        d.pop("workers")  # scheduling only; results do not depend on it
        return json.loads(json.dumps(d, sort_keys=True, default=list))

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _db_value(text: str, where: str) -> float:
    # thresholds stay in dB; a dB suffix is allowed but not required
    m = _UNIT.match(text)
    if not m or m.group(2) == "dBm":
        raise ConfigError(f"{where}: expected a dB value, got {text!r}")
    return float(m.group(1))


def _convert(key: str, value: str):
    if key in _LIST_KEYS:
        items = [v.strip() for v in value.split(",") if v.strip()]
        if key in _TEXT_KEYS:
            return tuple(items)
        if key == "experiment.thresholds":
            return tuple(_db_value(v, key) for v in items)
        nums = tuple(parse_number(v, key) for v in items)
        return tuple(int(n) for n in nums) if key == "scenario.irs_elements" else nums
    if key in _TEXT_KEYS:
        return value
    if key == "algo.sdr_budget" and value.lower() in ("", "none", "auto"):
        return None
    number = parse_number(value, key)
    if key in _INT_KEYS:
        if number != int(number):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(number)
    return number


def build(raw: dict[str, str]) -> RunConfig:
    values = {k: _convert(k, v) for k, v in raw.items()}
    scen = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("scenario.")}
    for key in ("mu", "robust_mu", "eps"):
        if f"algo.{key}" in values:
            scen[key] = values[f"algo.{key}"]
    try:
        scenario = ScenarioConfig(**scen)
        power = PowerModel(**{k.split(".", 1)[1]: v for k, v in values.items()
                              if k.startswith("power.")})
        power.total(0.0, 0, 0)  # rejects a bad eta early
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc
    algorithm = values.get("algo.name", "penalty-altmin")
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"algo.name: unknown algorithm {algorithm!r}; choose from {list(ALGORITHMS)}")
    return RunConfig(
        scenario=scenario, algorithm=algorithm,
        max_outer=values.get("algo.max_outer", 200),
        sdr_budget=values.get("algo.sdr_budget"),
        sweep_var=values.get("experiment.sweep_var", "gamma_db"),
        sweep_values=values.get("experiment.sweep_values", (2.0,)),
        algorithms=values.get("experiment.algorithms", ("penalty-altmin",)),
        drops=values.get("experiment.drops", 20),
        thresholds_db=values.get("experiment.thresholds", ()),
        workers=values.get("experiment.workers", 1),
        power=power)


def validate_experiment(cfg: RunConfig) -> ExperimentSpec:
    try:
        return cfg.experiment()
    except ValueError as exc:
        raise ConfigError(f"experiment: {exc}") from exc


def load(path: str | Path | None = None, overrides: dict[str, str] | None = None,
         environ=None) -> RunConfig:
    """Defaults, then the file at ``path``, then environment, then ``overrides``."""
    raw = parse_text(default_text(), "defaults")
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from exc
        raw.update(parse_text(text, str(p)))
    raw.update(env_overrides(environ))
    for key, value in (overrides or {}).items():
        if key not in KNOWN_KEYS:
            raise ConfigError(f"override: unknown key {key!r}")
        raw[key] = value
    return build(raw)
