"""Versioned JSON files for Q-tables and network weights.

Python writes floats with their shortest round-tripping repr, so finite
doubles survive a save/load cycle bit for bit. Non-finite values are
refused rather than written as non-standard JSON.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .game import ConfigurationError, JointQTable, n_joint
from .nn import Mlp

FORMAT_VERSION = 1


def _dump(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        text = json.dumps(obj, allow_nan=False, separators=(",", ":"))
    except ValueError as exc:
        raise ConfigurationError(f"refusing to write non-finite values to {path}") from exc
    path.write_text(text + "\n")


def _load(path, kind):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported format_version {doc.get('format_version')!r}")
    if doc.get("kind") != kind:
        raise ConfigurationError(f"{path}: expected kind {kind!r}, found {doc.get('kind')!r}")
    return doc


def save_q_tables(path, tables: Sequence[JointQTable], env: dict | None = None) -> None:
    """Write one table per agent; ``env`` optionally records the environment description."""
    if not tables:
        raise ConfigurationError("no tables to save")
    sizes = tables[0].sizes
    n_states = tables[0].n_states
    for t in tables:
        if t.sizes != sizes or t.n_states != n_states:
            raise ConfigurationError("tables disagree on shape")
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "q_tables",
        "n_agents": len(sizes),
        "action_sizes": list(sizes),
        "n_states": n_states,
        "env": env,
        "tables": [{"agent": t.agent_index, "values": np.asarray(t.values).tolist()}
                   for t in tables],
    }
    _dump(doc, path)


def load_q_tables(path) -> tuple[list[JointQTable], dict | None]:
    doc = _load(path, "q_tables")
    sizes = tuple(doc["action_sizes"])
    width = n_joint(sizes)
    out = []
    for entry in doc["tables"]:
        values = np.array(entry["values"], dtype=float)
        if values.shape != (doc["n_states"], width):
            raise ConfigurationError(f"{path}: table for agent {entry['agent']} has shape {values.shape}")
        out.append(JointQTable(int(entry["agent"]), sizes, values))
    return out, doc.get("env")


def save_weights(path, nets: dict[str, Mlp], env: dict | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "mlp_weights",
        "env": env,
        "networks": [{"name": name, "layer_sizes": list(net.sizes), "params": net.get_flat().tolist()}
                     for name, net in nets.items()],
    }
    _dump(doc, path)


def load_weights(path) -> tuple[dict[str, Mlp], dict | None]:
    doc = _load(path, "mlp_weights")
    nets = {}
    for entry in doc["networks"]:
        net = Mlp(entry["layer_sizes"], scale="zeros")
        net.set_flat(np.array(entry["params"], dtype=float))
        nets[entry["name"]] = net
    return nets, doc.get("env")
