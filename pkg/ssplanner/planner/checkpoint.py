"""
Binary checkpoint format.

Layout (all integers little-endian)::

    b"SSPL" | u32 version | u32 header length | JSON header | float32 payload

The JSON header holds the model config, any extra metadata (training config,
vocabulary) and a tensor index of ``name``, ``shape``, ``offset`` and
``nbytes``; offsets are relative to the start of the payload.
"""

import json
import logging
import os
import struct
from typing import Any, Dict, Optional, Tuple

import numpy as np
import torch

from ..exceptions import CheckpointFormatError
from .model import PlannerConfig, SSPlanner

logger = logging.getLogger(__name__)

MAGIC = b"SSPL"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sII")


def save_checkpoint(model: SSPlanner, path: str, metadata: Optional[Dict[str, Any]] = None) -> None:
    """Write ``model`` (and optional JSON-serializable metadata) to ``path``."""
    index = []
    payloads = []
    offset = 0
    for name, tensor in model.state_dict().items():
        data = tensor.detach().cpu().to(torch.float32).numpy().astype("<f4", copy=False)
        blob = np.ascontiguousarray(data).tobytes()
        index.append({"name": name, "shape": list(data.shape), "offset": offset, "nbytes": len(blob)})
        payloads.append(blob)
        offset += len(blob)

    header = {
        "config": model.config.to_dict(),
        "vocab_fingerprint": model.vocab_fingerprint,
        "metadata": metadata or {},
        "tensors": index,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for blob in payloads:
            f.write(blob)
    logger.info(f"Saved checkpoint with {len(index)} tensors to {path}")


def read_header(raw: bytes, path: str = "<bytes>") -> Tuple[Dict[str, Any], int]:
    """Validate the preamble and return the parsed header and payload start."""
    if len(raw) < _PREAMBLE.size:
        raise CheckpointFormatError(f"{path}: file too short for a checkpoint preamble")
    magic, version, header_length = _PREAMBLE.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic bytes {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported checkpoint version {version}")
    start = _PREAMBLE.size + header_length
    if len(raw) < start:
        raise CheckpointFormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[_PREAMBLE.size:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"{path}: unreadable header ({e})") from e
    return header, start


def load_checkpoint(path: str) -> Tuple[SSPlanner, Dict[str, Any]]:
    """Rebuild the model stored at ``path``; returns ``(model, metadata)``."""
    with open(path, "rb") as f:
        raw = f.read()
    header, start = read_header(raw, path)

    try:
        model = SSPlanner(PlannerConfig.from_dict(header["config"]))
        state = {}
        for entry in header["tensors"]:
            begin = start + int(entry["offset"])
            end = begin + int(entry["nbytes"])
            if end > len(raw):
                raise CheckpointFormatError(f"{path}: truncated payload for tensor {entry['name']}")
            values = np.frombuffer(raw, dtype="<f4", count=int(entry["nbytes"]) // 4, offset=begin)
            state[entry["name"]] = torch.from_numpy(values.astype(np.float32)).reshape(entry["shape"])
        model.load_state_dict(state)
    except (KeyError, TypeError, ValueError, RuntimeError) as e:
        raise CheckpointFormatError(f"{path}: inconsistent checkpoint ({e})") from e

    model.vocab_fingerprint = header.get("vocab_fingerprint")
    logger.info(f"Loaded checkpoint from {path}")
    return model, header.get("metadata", {})
