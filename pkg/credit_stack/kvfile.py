"""Read and write flat key=value files with dotted sections."""

from collections.abc import Mapping
from typing import Any

from .errors import ConfigError


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse `key = value` lines, skipping blanks and `#` comments."""
    result: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value'")
        if key in result:
            raise ConfigError(f"{source}:{line_no}: duplicate key '{key}'")

        result[key] = value.strip()

    return result


def nest_keys(flat: Mapping[str, str]) -> dict[str, Any]:
    """Turn dotted keys into nested dictionaries (`a.b = 1` -> `{a: {b: 1}}`)."""
    nested: dict[str, Any] = {}
    for key, value in flat.items():
        *sections, leaf = key.split(".")
        node = nested
        for section in sections:
            child = node.setdefault(section, {})
            if not isinstance(child, dict):
                raise ConfigError(f"key '{key}' conflicts with a plain value")
            node = child
        if isinstance(node.get(leaf), dict):
            raise ConfigError(f"key '{key}' conflicts with a section")
        node[leaf] = value

    return nested


def format_key_values(mapping: Mapping[str, Any]) -> str:
    """Render a flat mapping as `key=value` lines."""
    return "".join(f"{key}={_format_value(value)}\n" for key, value in mapping.items())


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list | tuple):
        return ",".join(_format_value(item) for item in value)
    if value is None:
        return ""

    return str(value)
