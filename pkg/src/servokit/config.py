"""Line-oriented ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Keys are dotted
(``cam.fu``, ``link2.theta0``, ``servo.lambda``). Values stay strings here;
each consumer converts and validates the keys it owns.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def check_known(settings: Mapping[str, str], known: Iterable[str]) -> None:
    """Reject keys outside ``known``."""
    unknown = sorted(set(settings) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def subset(settings: Mapping[str, str], prefix: str) -> dict[str, str]:
    return {k: v for k, v in settings.items() if k.startswith(prefix)}


def as_float(settings: Mapping[str, str], key: str, default: float) -> float:
    if key not in settings:
        return default
    try:
        return float(settings[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {settings[key]!r}") from None


def as_int(settings: Mapping[str, str], key: str, default: int) -> int:
    if key not in settings:
        return default
    try:
        return int(settings[key])
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {settings[key]!r}") from None


def as_floats(settings: Mapping[str, str], key: str, default=None) -> list[float] | None:
    """Comma-separated list of floats."""
    if key not in settings:
        return default
    try:
        return [float(tok) for tok in settings[key].split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers: {settings[key]!r}") from None
