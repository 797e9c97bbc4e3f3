"""Versioned weight checkpoints: a JSON header with shapes plus a tensor blob."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from ..errors import InvalidArgument
from .networks import ActionHead, ActionModel, PointNetEncoder

FORMAT = "claysculpt-weights"
VERSION = 1


def save_checkpoint(path, kind: str, module: torch.nn.Module, meta: dict | None = None) -> Path:
    """Write ``module``'s state dict as ``<path>`` (JSON) and ``<path>.npz``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = {k: v.detach().cpu().numpy() for k, v in module.state_dict().items()}
    header = {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "tensors": {k: {"shape": list(v.shape), "dtype": str(v.dtype)} for k, v in state.items()},
        "meta": meta or {},
    }
    np.savez(path.with_suffix(".npz"), **state)
    path.write_text(json.dumps(header, indent=2, sort_keys=True))
    return path


def load_checkpoint(path):
    """Return ``(module, header)``; the module class is chosen from ``kind``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    header = json.loads(path.read_text())
    if header.get("format") != FORMAT:
        raise InvalidArgument(f"{path}: not a {FORMAT} file")
    if header.get("version") != VERSION:
        raise InvalidArgument(f"{path}: unsupported checkpoint version {header.get('version')}")
    kind = header["kind"]
    if kind == "encoder":
        module = PointNetEncoder()
    elif kind == "action-model":
        module = ActionModel(PointNetEncoder(), ActionHead())
    else:
        raise InvalidArgument(f"{path}: unknown checkpoint kind {kind!r}")
    blob = np.load(path.with_suffix(".npz"))
    state = {}
    for name, spec in header["tensors"].items():
        arr = blob[name]
        if list(arr.shape) != spec["shape"]:
            raise InvalidArgument(f"{path}: tensor {name} has shape {arr.shape}, header says {spec['shape']}")
        state[name] = torch.as_tensor(arr)
    first = next(iter(state.values()))
    module = module.to(first.dtype)
    module.load_state_dict(state)
    module.eval()
    return module, header
