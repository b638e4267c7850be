"""Deterministic checkpoint file (`ckpt/v1`).

Layout: one UTF-8 JSON header line (version, metadata, array directory with
dtypes/shapes/offsets), then the raw little-endian array bytes in directory
order. Identical state always serializes to identical bytes, so checkpoint
hashes can stand in for state comparison.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

CKPT_VERSION = "ckpt/v1"


class CheckpointError(ValueError):
    pass


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    directory = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        blob = arr.tobytes()
        directory.append({
            "name": name,
            "dtype": arr.dtype.str,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"version": CKPT_VERSION, "meta": meta, "arrays": directory},
                        sort_keys=True)
    with open(path, "wb") as fh:
        fh.write(header.encode() + b"\n")
        for blob in blobs:
            fh.write(blob)


def load_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"unreadable checkpoint header: {e}") from e
        if header.get("version") != CKPT_VERSION:
            raise CheckpointError(
                f"expected {CKPT_VERSION} checkpoint, got {header.get('version')!r}")
        payload = fh.read()
    arrays = {}
    for rec in header["arrays"]:
        blob = payload[rec["offset"]:rec["offset"] + rec["nbytes"]]
        if len(blob) != rec["nbytes"]:
            raise CheckpointError(f"truncated checkpoint: array {rec['name']}")
        arrays[rec["name"]] = np.frombuffer(blob, dtype=np.dtype(rec["dtype"])) \
            .reshape(rec["shape"]).copy()
    return arrays, header["meta"]


# -- torch helpers -----------------------------------------------------------


def module_arrays(prefix: str, module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {f"{prefix}.{k}": v.detach().numpy().copy()
            for k, v in module.state_dict().items()}


def restore_module(prefix: str, module: torch.nn.Module,
                   arrays: dict[str, np.ndarray]) -> None:
    state = {}
    for k, ref in module.state_dict().items():
        arr = arrays[f"{prefix}.{k}"]
        state[k] = torch.as_tensor(arr, dtype=ref.dtype).reshape(ref.shape)
    module.load_state_dict(state)


def optimizer_arrays(prefix: str, opt: torch.optim.Optimizer) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    state = opt.state_dict()["state"]
    for pid in sorted(state):
        for key, val in sorted(state[pid].items()):
            if isinstance(val, torch.Tensor):
                out[f"{prefix}.{pid}.{key}"] = val.detach().numpy().copy()
            else:
                out[f"{prefix}.{pid}.{key}"] = np.asarray(val, dtype=np.float64)
    return out


def restore_optimizer(prefix: str, opt: torch.optim.Optimizer,
                      arrays: dict[str, np.ndarray]) -> None:
    live_params = [p for group in opt.param_groups for p in group["params"]]
    state: dict[int, dict] = {}
    for name, arr in arrays.items():
        if not name.startswith(prefix + "."):
            continue
        pid_s, key = name[len(prefix) + 1:].split(".", 1)
        pid = int(pid_s)
        entry = state.setdefault(pid, {})
        if key == "step":
            entry[key] = torch.tensor(float(np.asarray(arr).reshape(-1)[0]))
        else:
            ref = live_params[pid]
            entry[key] = torch.as_tensor(arr, dtype=ref.dtype).reshape(ref.shape)
    sd = opt.state_dict()
    sd["state"] = state
    opt.load_state_dict(sd)
