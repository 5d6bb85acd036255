"""Model file format.

Layout: an 8-byte little-endian header length, a UTF-8 JSON header, then the
parameter blocks as raw little-endian float64 in declaration order, followed
by any named extra arrays (normalisation stats, envelopes, ...).  The header
records a hash of the architecture descriptor; the loader refuses files
whose stored hash does not match their own descriptor.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import SerializationError

FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def descriptor_hash(descriptor: dict) -> str:
    return hashlib.sha256(canonical_json(descriptor).encode()).hexdigest()


@dataclass
class ModelFile:
    descriptor: dict
    params: dict[str, np.ndarray]
    extras: dict[str, np.ndarray] = field(default_factory=dict)
    seed: int | None = None
    train_config: dict = field(default_factory=dict)
    tool_version: str = ""
    param_order: list[str] = field(default_factory=list)


def save_model(path, descriptor: dict, named_params, extras: dict | None = None,
               seed: int | None = None, train_config: dict | None = None):
    """Write a model file; `named_params` is an iterable of (name, Parameter
    or ndarray) in declaration order."""
    from .. import __version__

    named_params = [(name, np.asarray(getattr(p, "data", p), dtype=np.float64))
                    for name, p in named_params]
    extras = {k: np.asarray(v, dtype=np.float64) for k, v in (extras or {}).items()}
    header = {
        "format_version": FORMAT_VERSION,
        "tool_version": __version__,
        "descriptor": descriptor,
        "descriptor_hash": descriptor_hash(descriptor),
        "seed": seed,
        "train_config": train_config or {},
        "params": [{"name": n, "shape": list(a.shape)} for n, a in named_params],
        "extras": [{"name": n, "shape": list(extras[n].shape)}
                   for n in sorted(extras)],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, arr in named_params:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        for name in sorted(extras):
            fh.write(np.ascontiguousarray(extras[name], dtype="<f8").tobytes())


def load_model(path) -> ModelFile:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise SerializationError("file too short for a model header")
    (header_len,) = struct.unpack("<Q", raw[:8])
    if 8 + header_len > len(raw):
        raise SerializationError("truncated model header")
    try:
        header = json.loads(raw[8:8 + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SerializationError(f"corrupt model header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise SerializationError(
            f"unsupported format version {header.get('format_version')!r}")
    if header.get("descriptor_hash") != descriptor_hash(header["descriptor"]):
        raise SerializationError("descriptor hash mismatch; file rejected")

    offset = 8 + header_len
    params: dict[str, np.ndarray] = {}
    order: list[str] = []
    for spec in header["params"]:
        shape = tuple(spec["shape"])
        n = int(np.prod(shape)) if shape else 1
        end = offset + 8 * n
        if end > len(raw):
            raise SerializationError(f"truncated parameter block {spec['name']!r}")
        params[spec["name"]] = np.frombuffer(
            raw[offset:end], dtype="<f8").reshape(shape).copy()
        order.append(spec["name"])
        offset = end
    extras: dict[str, np.ndarray] = {}
    for spec in header["extras"]:
        shape = tuple(spec["shape"])
        n = int(np.prod(shape)) if shape else 1
        end = offset + 8 * n
        if end > len(raw):
            raise SerializationError(f"truncated extra block {spec['name']!r}")
        extras[spec["name"]] = np.frombuffer(
            raw[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise SerializationError("trailing bytes after declared blocks")
    return ModelFile(descriptor=header["descriptor"], params=params,
                     extras=extras, seed=header.get("seed"),
                     train_config=header.get("train_config", {}),
                     tool_version=header.get("tool_version", ""),
                     param_order=order)


def restore_parameters(module, model_file: ModelFile, prefix: str = ""):
    """Copy stored parameter blocks into a freshly built module, matching by
    declaration-order name."""
    for name, param in module.named_parameters(prefix):
        if name not in model_file.params:
            raise SerializationError(f"missing parameter block {name!r}")
        stored = model_file.params[name]
        if stored.shape != param.data.shape:
            raise SerializationError(
                f"shape mismatch for {name!r}: file {stored.shape}, "
                f"model {param.data.shape}")
        param.data = stored.copy()
