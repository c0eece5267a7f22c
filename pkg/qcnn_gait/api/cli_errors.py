"""User-facing text for configuration errors raised by the CLI."""

from __future__ import annotations

from pathlib import Path

import yaml
from pydantic import ValidationError
from rich.panel import Panel

from qcnn_gait.api.settings import SettingsError

REQUIRED = "<required>"

# CLI flags that can stand in for a config key
_OVERRIDES = {
    "train.seed": "--seed",
    "train.dataset": "--dataset",
    "dataset": "--dataset",
    "seed": "--seed",
    "flip.axis": "--axis",
    "flip.trials": "--trials",
    "runtime.output_dir": "--out",
}


def _as_lists(node: dict) -> object:
    """Turn dicts keyed only by list indices into lists, recursively."""
    if not isinstance(node, dict):
        return node
    if node and all(isinstance(key, int) for key in node):
        return [_as_lists(node[key]) for key in sorted(node)]
    return {key: _as_lists(value) for key, value in node.items()}


def missing_key_snippet(missing: list[tuple[str | int, ...]]) -> str:
    """YAML with a placeholder at every missing location, layer lists included."""
    tree: dict = {}
    for loc in missing:
        node = tree
        for part in loc[:-1]:
            node = node.setdefault(part, {})
        node[loc[-1]] = REQUIRED
    if not tree:
        return ""
    body = yaml.safe_dump(_as_lists(tree), sort_keys=False, default_flow_style=False)
    return "Example config snippet:\n" + body.rstrip()


def format_pydantic_validation_error(
    exc: ValidationError,
    *,
    file_name: str = "config.yaml",
) -> str:
    """One bullet per error, a snippet for missing keys and the flags that can override."""
    lines = [f"Invalid configuration in {file_name}:"]
    missing: list[tuple[str | int, ...]] = []
    flags: list[str] = []

    for err in exc.errors(include_url=False):
        loc = tuple(err.get("loc", ()))
        path = ".".join(str(part) for part in loc)
        lines.append(f"• {path}: {err.get('msg', 'Invalid value')}")
        if err.get("type") == "missing" and loc:
            # union member labels such as "ModelSpec" are not config keys
            missing.append(tuple(p for p in loc if not (isinstance(p, str) and p[:1].isupper())))
        flag = _OVERRIDES.get(path)
        if flag and flag not in flags:
            flags.append(flag)

    snippet = missing_key_snippet(missing)
    if snippet:
        lines.extend(["", snippet])

    lines.extend(["", "Fix:", f"• Add or correct these values in {Path(file_name).name}"])
    if flags:
        lines.append(f"• Or pass {', '.join(flags)} on the command line.")
    return "\n".join(lines)


def format_settings_error(exc: SettingsError, *, config_path: Path) -> str:
    if exc.validation_error is not None:
        return format_pydantic_validation_error(exc.validation_error, file_name=str(config_path))
    return str(exc)


def render_config_error_panel(message: str) -> Panel:
    return Panel.fit(message, title="Configuration error", border_style="red")
