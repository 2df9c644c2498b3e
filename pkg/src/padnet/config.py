"""Experiment configuration files.

A config is a flat TOML document with up to four tables::

    [problem]     # ProblemSpec fields
    [padnet]      # SolverConfig fields
    [baseline]    # BaselineConfig fields
    [train]       # TrainConfig fields

Keys are exactly the dataclass field names; unknown keys are errors and
missing keys take the dataclass defaults.  ``size`` is written as a two
element array, ``mu`` may be omitted to get ``2.5 * c_e``.
"""
from __future__ import annotations

import dataclasses
import os
import re
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .baselines import BaselineConfig
from .network import TrainConfig
from .problems import ProblemSpec
from .solver import SolverConfig

__all__ = ["ConfigError", "Config", "SECTIONS", "parse_config", "parse_config_text", "serialize_config"]


class ConfigError(ValueError):
    """Syntax or constraint problem in a config file."""


@dataclass(frozen=True)
class Config:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    padnet: SolverConfig = field(default_factory=SolverConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __iter__(self):
        return iter((self.problem, self.padnet, self.baseline, self.train))

    def with_seed(self, seed: int) -> "Config":
        return dataclasses.replace(self, problem=dataclasses.replace(self.problem, seed=seed))

    def as_dict(self) -> dict:
        return {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}


SECTIONS = {
    "problem": ProblemSpec,
    "padnet": SolverConfig,
    "baseline": BaselineConfig,
    "train": TrainConfig,
}

_LINE_RE = re.compile(r"line (\d+)")


def _coerce(cls, key: str, value, ftype: str):
    # TOML ints are fine where floats are expected; the reverse is not
    if ftype in ("float", "float | None"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{cls}] {key} must be a number")
        return float(value)
    if ftype == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{cls}] {key} must be an integer")
        return value
    if ftype == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"[{cls}] {key} must be true or false")
        return value
    if ftype == "str":
        if not isinstance(value, str):
            raise ConfigError(f"[{cls}] {key} must be a string")
        return value
    if ftype == "tuple[int, int]":
        if not (isinstance(value, list) and len(value) == 2 and all(type(v) is int for v in value)):
            raise ConfigError(f"[{cls}] {key} must be a two-integer array")
        return tuple(value)
    raise AssertionError(f"unhandled field type {ftype}")


def _build(section: str, table: dict):
    cls = SECTIONS[section]
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in table.items():
        if key not in fields:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        kwargs[key] = _coerce(section, key, value, str(fields[key].type))
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def parse_config_text(text: str) -> Config:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LINE_RE.search(str(exc))
        where = f"line {m.group(1)}: " if m else ""
        raise ConfigError(f"syntax error: {where}{exc}") from exc
    for name, value in doc.items():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section or top-level key {name!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"{name!r} must be a [section]")
    return Config(**{name: _build(name, doc.get(name, {})) for name in SECTIONS})


def parse_config(path: str | os.PathLike) -> Config:
    """Read and validate a config file; raises ``ConfigError`` or ``OSError``."""
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def serialize_config(cfg: Config) -> str:
    """Text that ``parse_config_text`` maps back to an equal ``Config``."""
    lines = []
    for name in SECTIONS:
        lines.append(f"[{name}]")
        for key, value in dataclasses.asdict(getattr(cfg, name)).items():
            lines.append(f"{key} = {_fmt(value)}")
        lines.append("")
    return "\n".join(lines)
