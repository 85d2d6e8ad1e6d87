"""Flat ``key=value`` configs and the header stamped on every written artifact."""
from __future__ import annotations

import dataclasses
import hashlib

from . import __version__
from .errors import ConfigError

HEADER_PREFIX = "#mnmt"


def parse_kv(text: str) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {n}: expected key=value, got {raw!r}")
        out[key.replace("-", "_")] = value
    return out


def load_kv(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_kv(fh.read())
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None


def _coerce(value, kind):
    if kind in ("int", int):
        return int(value)
    if kind in ("float", float):
        return float(value)
    if kind in ("bool", bool):
        if str(value).lower() in ("1", "true", "yes", "on"):
            return True
        if str(value).lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(value)
    return value


def fill(cls, values: dict, strict=False):
    """Instantiate dataclass ``cls`` from string values, converting field types.

    Unknown keys are ignored unless ``strict``.
    """
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if key not in fields:
            if strict:
                raise ConfigError(f"unknown config key {key!r}")
            continue
        try:
            kwargs[key] = _coerce(value, fields[key].type)
        except ValueError:
            raise ConfigError(f"{key}: cannot read {value!r} as {fields[key].type}") from None
    return cls(**kwargs)


def config_hash(values: dict) -> str:
    blob = "\n".join(f"{k}={values[k]}" for k in sorted(values))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def artifact_header(values: dict, seed) -> str:
    return f"{HEADER_PREFIX} version={__version__} config={config_hash(values)} seed={seed}"


def read_lines(path) -> list:
    """Text lines without the artifact header and without the trailing empty line."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [line for line in lines if not line.startswith(HEADER_PREFIX)]


def write_lines(path, lines, header=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(header + "\n")
        for line in lines:
            fh.write(line + "\n")
