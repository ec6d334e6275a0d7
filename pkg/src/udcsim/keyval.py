"""Plain-text ``key = value`` files.

One format serves image sidecars, optics/model configuration, and
calibration reports, so every tool input stays diffable and greppable.
Lines are ``key = value``; ``#`` starts a comment; blank lines are
ignored; duplicate keys are an error (they are almost always typos).
Keys carry their unit as a suffix where one applies (``focal_length_um``,
``wavelength_r_nm``) to keep unit bugs loud.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Mapping

from .errors import ConfigError

_MISSING = object()


def parse_text(text: str, source: str = "<string>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def load(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc})") from exc
    return parse_text(text, source=str(path))


def dump(pairs: Mapping[str, object], path: str | Path, header: str | None = None) -> None:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for key, value in pairs.items():
        lines.append(f"{key} = {value}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file and rename so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def get_str(pairs: Mapping[str, str], key: str, default=_MISSING, *, source: str = "config") -> str:
    if key in pairs:
        return pairs[key]
    if default is _MISSING:
        raise ConfigError(f"{source}: missing required key {key!r}")
    return default


def get_float(pairs: Mapping[str, str], key: str, default=_MISSING, *, source: str = "config") -> float:
    raw = get_str(pairs, key, default, source=source)
    if raw is default and key not in pairs:
        return raw  # type: ignore[return-value]
    try:
        return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: key {key!r} is not a number: {raw!r}") from exc


def get_int(pairs: Mapping[str, str], key: str, default=_MISSING, *, source: str = "config") -> int:
    raw = get_str(pairs, key, default, source=source)
    if raw is default and key not in pairs:
        return raw  # type: ignore[return-value]
    try:
        return int(str(raw), 0)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: key {key!r} is not an integer: {raw!r}") from exc


def get_bool(pairs: Mapping[str, str], key: str, default=_MISSING, *, source: str = "config") -> bool:
    raw = get_str(pairs, key, default, source=source)
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{source}: key {key!r} is not a boolean: {raw!r}")
