"""Run configuration: INI parsing, validation, canonical echo.

Configs are INI text (UTF-8, '#' comments) with a fixed schema of
sections and keys.  Unknown sections or keys are rejected with
diagnostics rather than ignored, every value is parsed to its declared
type, and the fully resolved configuration can be rendered back to a
canonical text whose SHA-256 identifies the run.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "default_config",
    "resolved_text",
    "config_sha256",
]


class ConfigError(ValueError):
    """Invalid configuration; message carries section/key diagnostics."""


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"invalid float {text!r}") from None


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"invalid int {text!r}") from None


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"invalid bool {text!r}")


def _parse_str(text: str) -> str:
    return text.strip()


def _parse_floats(text: str) -> tuple:
    items = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(_parse_float(p) for p in items)


def _parse_ints(text: str) -> tuple:
    items = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(_parse_int(p) for p in items)


def _parse_float_sets(text: str) -> tuple:
    groups = [g.strip() for g in text.split(";") if g.strip()]
    return tuple(_parse_floats(g) for g in groups)


# section -> key -> (parser, default text). The default column makes every
# subcommand runnable with no config file at all.
SCHEMA = {
    "grid": {
        "T": (_parse_float, "1.0"),
        "T_star": (_parse_float, "2.0"),
        "steps": (_parse_int, "128"),
        "maturities": (_parse_floats, "0.5, 1.1, 1.25, 1.6, 2.0"),
    },
    "scenarios": {
        "count": (_parse_int, "20000"),
        "seed": (_parse_int, "12345"),
    },
    "model": {
        "tag": (_parse_str, "gaussian2f"),
        "sigma0": (_parse_floats, "0.012, 0.018"),
        "mean_reversion": (_parse_floats, "0.1, 1.4"),
        "risk_premium": (_parse_floats, "0.24, -0.18"),
        "f0_flat": (_parse_float, "0.03"),
        "f0_slope": (_parse_float, "0.0"),
        "n_max": (_parse_int, "200"),
        "cutoff_k": (_parse_ints, "2, 5"),
    },
    "strategy": {
        "name": (_parse_str, "example21"),
        "n_schedule": (_parse_ints, "10, 20, 50, 100, 200"),
        "cauchy_tol": (_parse_float, "0.05"),
    },
    "utility": {
        "kind": (_parse_str, "log"),
        "power_p": (_parse_float, "0.5"),
        "x0": (_parse_float, "1.0"),
        "maturity_sets": (_parse_float_sets, "2.0; 2.0, 1.25; 2.0, 1.25, 1.6; 2.0, 1.25, 1.6, 1.1"),
        "y_grid_lo": (_parse_float, "0.8"),
        "y_grid_hi": (_parse_float, "1.25"),
        "y_grid_n": (_parse_int, "41"),
        "opt_scenarios": (_parse_int, "16384"),
        "restarts": (_parse_int, "2"),
    },
    "claim": {
        "kind": (_parse_str, "zcb_call"),
        "maturity": (_parse_float, "2.0"),
        "strike": (_parse_float, "0.965"),
        "tradables": (_parse_floats, "1.25, 2.0"),
        "drift_loadings": (_parse_floats, ""),
        "refine_steps": (_parse_ints, ""),
    },
    "measure": {
        "kind": (_parse_str, "uniform"),
        "lo": (_parse_float, "0.25"),
        "hi": (_parse_float, "1.75"),
        "cells": (_parse_int, "256"),
        "total_mass": (_parse_float, "1.0"),
        "rate": (_parse_float, "1.5"),
        "budgets": (_parse_ints, "4, 8, 16, 32"),
        "curve": (_parse_str, "exp"),
    },
    "continuity": {
        "family": (_parse_str, "example21"),
        "x": (_parse_float, "0.5"),
        "offsets": (_parse_floats, "0.2, 0.1, 0.05, 0.025"),
    },
    "output": {
        "directory": (_parse_str, "runs"),
        "formats": (_parse_str, "csv,json"),
    },
}

_SECTION_ORDER = tuple(SCHEMA)


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration: raw text values plus typed accessors."""

    raw: dict

    def get(self, section: str, key: str):
        parser, _ = SCHEMA[section][key]
        try:
            return parser(self.raw[section][key])
        except ConfigError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None


def default_config() -> RunConfig:
    raw = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    return RunConfig(raw)


def load_config(path=None, overrides=None) -> RunConfig:
    """Resolve a config from an optional INI file plus override pairs.

    ``overrides`` maps (section, key) to replacement text, used for CLI
    flags.  Unknown sections/keys in the file or the overrides raise
    ConfigError with the offending name and the known alternatives.
    """
    raw = {s: dict(d) for s, d in default_config().raw.items()}
    if path is not None:
        parser = configparser.ConfigParser(
            comment_prefixes=("#",), inline_comment_prefixes=("#",),
            interpolation=None,
        )
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(
                    f"unknown section [{section}] (known: {', '.join(_SECTION_ORDER)})"
                )
            for key, value in parser.items(section):
                if key not in SCHEMA[section]:
                    known = ", ".join(SCHEMA[section])
                    raise ConfigError(
                        f"unknown key [{section}] {key} (known keys: {known})"
                    )
                raw[section][key] = value
    for (section, key), value in (overrides or {}).items():
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown override [{section}] {key}")
        raw[section][key] = str(value)
    cfg = RunConfig(raw)
    for section, keys in SCHEMA.items():
        for key in keys:
            cfg.get(section, key)  # type-check everything now
    return cfg


def resolved_text(cfg: RunConfig) -> str:
    """Canonical INI rendering of a resolved config (schema order).

    The output directory is omitted: it locates a run without changing
    it, and the echo (plus its hash) must be identical wherever the
    outputs land.
    """
    lines = ["# resolved run configuration"]
    for section in _SECTION_ORDER:
        lines.append("")
        lines.append(f"[{section}]")
        for key in SCHEMA[section]:
            if (section, key) == ("output", "directory"):
                continue
            lines.append(f"{key} = {cfg.raw[section][key]}")
    return "\n".join(lines) + "\n"


def config_sha256(cfg: RunConfig) -> str:
    return hashlib.sha256(resolved_text(cfg).encode("utf-8")).hexdigest()
