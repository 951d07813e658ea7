"""
Run configuration: one TOML file, one section per concern.

    [grid]          steps, start_weekday
    [fleet]         seed, size, csv, param_rule, plus generator keys
    [prices]        seed, csv, plus generator keys
    [uncontrolled]  variant, anxiety_fraction, initial_soc_fraction
    [anchor]        mode, weight
    [sa]            charge_factor, discharge_factor, soc_min_factor, soc_max_factor
    [bilevel]       deviation weights, big-M policy, search limits
    [tolerances]    feas_tol, comp_tol, duality_tol, max_iter
    [run]           output_dir, mappings, solver, export_format, threads

Every key has a default; docs/config.md lists them.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import tomllib
from dataclasses import dataclass, field, fields
from enum import Enum, StrEnum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

from .aggregate import DEFAULT_MAPPINGS, AggregationParamRule, SaHeuristics, check_group_width
from .bilevel import BilevelConfig
from .errors import ConfigurationError
from .lp_core import ToleranceConfig
from .profiles import FleetGenSpec, PriceGenSpec, TimeGrid, UncontrolledMode, params_path

ENV_OUTPUT_DIR = "PYAEV_OUTPUT_DIR"
ENV_THREADS = "PYAEV_THREADS"
DIGEST_LENGTH = 12


class AnchorMode(StrEnum):
    NONE = "none"
    UNCONTROLLED = "uncontrolled"


class SolverPath(StrEnum):
    INTERNAL = "internal"
    EXPORT_ONLY = "export_only"


class ExportFormat(StrEnum):
    MPS = "mps"
    LP = "lp"


@dataclass(frozen=True)
class FleetSource:
    """Generate `size` commuters from `seed`, or load `csv` when set"""
    seed: int = 1
    size: int = 20
    csv: Optional[str] = None
    param_rule: AggregationParamRule = AggregationParamRule.CAPACITY_WEIGHTED

    def __post_init__(self):
        if self.size < 1:
            raise ConfigurationError(f"fleet.size must be positive, got {self.size}")
        try:
            object.__setattr__(self, 'param_rule', AggregationParamRule(self.param_rule))
        except ValueError:
            raise ConfigurationError(f"unknown fleet.param_rule '{self.param_rule}'") from None


@dataclass(frozen=True)
class PriceSource:
    seed: int = 1
    csv: Optional[str] = None


@dataclass(frozen=True)
class AnchorConfig:
    """Optional quadratic pull of each vehicle's charging towards its uncontrolled schedule"""
    mode: AnchorMode = AnchorMode.NONE
    weight: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, 'mode', AnchorMode(self.mode))
        except ValueError:
            raise ConfigurationError(f"unknown anchor.mode '{self.mode}'") from None
        if self.weight < 0:
            raise ConfigurationError(f"anchor.weight must be nonnegative, got {self.weight}")
        if self.mode == AnchorMode.UNCONTROLLED and self.weight == 0:
            raise ConfigurationError("anchor.mode 'uncontrolled' needs a positive weight")

    @property
    def enabled(self) -> bool:
        return self.mode != AnchorMode.NONE


@dataclass(frozen=True)
class RunSettings:
    output_dir: str = "out"
    mappings: Tuple[int, ...] = DEFAULT_MAPPINGS
    solver: SolverPath = SolverPath.INTERNAL
    export_format: ExportFormat = ExportFormat.MPS
    threads: int = 0

    def __post_init__(self):
        mappings = tuple(sorted({check_group_width(n) for n in self.mappings}, reverse=True))
        if not mappings:
            raise ConfigurationError("run.mappings must name at least one group width")
        object.__setattr__(self, 'mappings', mappings)
        try:
            object.__setattr__(self, 'solver', SolverPath(self.solver))
            object.__setattr__(self, 'export_format', ExportFormat(self.export_format))
        except ValueError as e:
            raise ConfigurationError(str(e)) from None
        if self.threads < 0:
            raise ConfigurationError("run.threads must be nonnegative")


# section name -> (RunConfig attribute, dataclass) in file order
SECTIONS = {
    'grid': (('grid', TimeGrid),),
    'fleet': (('fleet', FleetSource), ('fleet_spec', FleetGenSpec)),
    'prices': (('prices', PriceSource), ('price_spec', PriceGenSpec)),
    'uncontrolled': (('uncontrolled', UncontrolledMode),),
    'anchor': (('anchor', AnchorConfig),),
    'sa': (('sa', SaHeuristics),),
    'bilevel': (('bilevel', BilevelConfig),),
    'tolerances': (('tolerances', ToleranceConfig),),
    'run': (('run', RunSettings),),
}

# config sections each pipeline stage depends on
STAGE_SECTIONS = {
    'gen': ('grid', 'fleet', 'prices'),
    'reference': ('grid', 'fleet', 'prices', 'uncontrolled', 'anchor', 'tolerances'),
    'sa': ('grid', 'fleet', 'prices', 'uncontrolled', 'anchor', 'tolerances', 'sa', 'bilevel'),
    'bilevel': ('grid', 'fleet', 'prices', 'uncontrolled', 'anchor', 'tolerances', 'bilevel'),
    'evaluate': tuple(SECTIONS),
}


@dataclass(frozen=True)
class RunConfig:
    grid: TimeGrid = field(default_factory=lambda: TimeGrid(168))
    fleet: FleetSource = field(default_factory=FleetSource)
    fleet_spec: FleetGenSpec = field(default_factory=FleetGenSpec)
    prices: PriceSource = field(default_factory=PriceSource)
    price_spec: PriceGenSpec = field(default_factory=PriceGenSpec)
    uncontrolled: UncontrolledMode = field(default_factory=UncontrolledMode)
    anchor: AnchorConfig = field(default_factory=AnchorConfig)
    sa: SaHeuristics = field(default_factory=SaHeuristics)
    bilevel: BilevelConfig = field(default_factory=BilevelConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    run: RunSettings = field(default_factory=RunSettings)

    @property
    def output_dir(self) -> Path:
        return Path(self.run.output_dir)

    @property
    def threads(self) -> Optional[int]:
        return self.run.threads or None

    def bilevel_for(self, n: int) -> BilevelConfig:
        cfg = self.bilevel.with_group_width(n)
        if cfg.threads == 0 and self.run.threads:
            cfg = dataclasses.replace(cfg, threads=self.run.threads)
        return cfg

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        data: Dict[str, Dict[str, Any]] = {}
        for section, parts in SECTIONS.items():
            merged: Dict[str, Any] = {}
            for attr, _ in parts:
                value = getattr(self, attr)
                merged.update({f.name: _plain(getattr(value, f.name)) for f in fields(value) if f.init})
            data[section] = merged
        return data

    def digest(self, sections: Optional[Iterable[str]] = None) -> str:
        """First 12 hex digits of the SHA-256 of the canonical JSON of some (default all) sections"""
        data = self.to_dict()
        if sections is not None:
            data = {name: data[name] for name in sections}
        if 'run' in data:
            # where results go and how many workers compute them do not change them
            data['run'] = {k: v for k, v in data['run'].items() if k not in ('output_dir', 'threads')}
        if 'bilevel' in data:
            data['bilevel'] = {k: v for k, v in data['bilevel'].items() if k != 'threads'}
        # files named by the config enter by content
        if 'fleet' in data and self.fleet.csv:
            data['fleet'] = {**data['fleet'],
                             'csv_sha256': file_digest(self.fleet.csv, params_path(self.fleet.csv))}
        if 'prices' in data and self.prices.csv:
            data['prices'] = {**data['prices'], 'csv_sha256': file_digest(self.prices.csv)}
        canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:DIGEST_LENGTH]

    def stage_digest(self, stage: str) -> str:
        try:
            return self.digest(STAGE_SECTIONS[stage])
        except KeyError:
            raise ConfigurationError(f"unknown stage '{stage}'") from None


DEFAULTS = RunConfig()


def file_digest(*paths: Union[str, Path]) -> str:
    """SHA-256 over the names and bytes of the given files; an unreadable file hashes as a marker"""
    sha = hashlib.sha256()
    for path in paths:
        path = Path(path)
        sha.update(path.name.encode('utf-8') + b"\0")
        try:
            with path.open('rb') as fh:
                for chunk in iter(lambda: fh.read(1 << 16), b""):
                    sha.update(chunk)
        except OSError:
            sha.update(b"\0missing")
    return sha.hexdigest()


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def _parse_value(text: str) -> Any:
    """TOML literal if it parses as one, else the bare string"""
    try:
        return tomllib.loads(f"value = {text}")['value']
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: Dict[str, Dict[str, Any]], overrides: Iterable[str]) -> Dict[str, Dict[str, Any]]:
    """Apply `section.key=value` overrides to a raw config mapping"""
    merged = {name: dict(values) for name, values in raw.items()}
    for item in overrides:
        path, sep, text = item.partition("=")
        section, dot, key = path.strip().partition(".")
        if not sep or not dot or not key:
            raise ConfigurationError(f"override '{item}' is not of the form section.key=value")
        if section not in SECTIONS:
            raise ConfigurationError(f"override '{item}' names unknown section '{section}'")
        merged.setdefault(section, {})[key.strip()] = _parse_value(text.strip())
    return merged


def _build_section(section: str, values: Dict[str, Any]) -> Dict[str, Any]:
    parts = SECTIONS[section]
    known = {f.name for _, cls in parts for f in fields(cls) if f.init}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationError(f"[{section}] has unknown keys {unknown}")
    built = {}
    for attr, cls in parts:
        own = {f.name for f in fields(cls) if f.init}
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items() if k in own}
        try:
            built[attr] = dataclasses.replace(getattr(DEFAULTS, attr), **kwargs)
        except TypeError as e:
            raise ConfigurationError(f"[{section}]: {e}") from e
    return built


def apply_environment(raw: Dict[str, Dict[str, Any]], environ: Dict[str, str]) -> Dict[str, Dict[str, Any]]:
    """Output directory and thread count from the environment; --set still wins"""
    raw = {name: dict(values) if isinstance(values, dict) else values for name, values in raw.items()}
    run = raw.setdefault('run', {})
    if environ.get(ENV_OUTPUT_DIR):
        run['output_dir'] = environ[ENV_OUTPUT_DIR]
    if environ.get(ENV_THREADS):
        try:
            run['threads'] = int(environ[ENV_THREADS])
        except ValueError:
            raise ConfigurationError(f"{ENV_THREADS} must be an integer") from None
    return raw


def build_config(raw: Dict[str, Dict[str, Any]]) -> RunConfig:
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigurationError(f"unknown config sections {unknown}")
    kwargs = {}
    for section in SECTIONS:
        if section in raw:
            kwargs.update(_build_section(section, raw[section]))
    return RunConfig(**kwargs)


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = (),
                environ: Optional[Dict[str, str]] = None) -> RunConfig:
    """Read a TOML config (defaults only when path is None) and apply overrides"""
    raw: Dict[str, Dict[str, Any]] = {}
    if path is not None:
        path = Path(path)
        try:
            with path.open('rb') as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigurationError(f"config file {path} does not exist") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"{path}: {e}") from e
        for name, values in raw.items():
            if not isinstance(values, dict):
                raise ConfigurationError(f"{path}: '{name}' must be a [section]")
    environ = os.environ if environ is None else environ
    return build_config(apply_overrides(apply_environment(raw, environ), overrides))
