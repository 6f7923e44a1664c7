import json
import logging
from pathlib import Path

import numpy as np

from modules.model.transformer import FTTransformer, ModelSpec
from utils.helpers import atomic_write_bytes, atomic_write_json, atomic_write_text

logger = logging.getLogger(__name__)

_PE_BUFFER = "buffer.pe_values"
_DTYPE = np.dtype("<f8")


def checkpoint_paths(path):
    """(tensor file, manifest, metadata) for a checkpoint prefix"""
    path = Path(path)
    return (path.with_name(path.name + ".bin"),
            path.with_name(path.name + ".manifest.txt"),
            path.with_name(path.name + ".json"))


def save_checkpoint(model, path):
    """
    Write every tensor into one little-endian float64 file with a text manifest.

    Manifest lines are "name<TAB>shape<TAB>byte offset"; the spec and
    target scaling go to a JSON file next to it.

    Returns:
        tuple: (tensor path, manifest path, metadata path)
    """
    bin_path, manifest_path, meta_path = checkpoint_paths(path)
    tensors = {name: model.params[name] for name in sorted(model.params)}
    if model.pe_values is not None:
        tensors[_PE_BUFFER] = model.pe_values

    chunks, lines, offset = [], [], 0
    for name, value in tensors.items():
        payload = np.ascontiguousarray(value, dtype=_DTYPE).tobytes()
        shape = ",".join(str(s) for s in np.shape(value))
        lines.append(f"{name}\t{shape}\t{offset}")
        chunks.append(payload)
        offset += len(payload)

    atomic_write_bytes(bin_path, b"".join(chunks))
    atomic_write_text(manifest_path, "\n".join(lines) + "\n")
    atomic_write_json(meta_path, {
        "spec": model.spec.to_dict(),
        "target_mean": model.target_mean,
        "target_std": model.target_std,
    })
    logger.info("Saved checkpoint with %d tensors (%d bytes) to %s", len(tensors), offset, bin_path)
    return bin_path, manifest_path, meta_path


def load_checkpoint(path):
    """
    Rebuild a model from save_checkpoint output.

    Returns:
        FTTransformer: Model with identical weights, PE buffer and target scaling
    """
    bin_path, manifest_path, meta_path = checkpoint_paths(path)
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    raw = bin_path.read_bytes()

    tensors = {}
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        name, shape_text, offset_text = line.split("\t")
        shape = tuple(int(s) for s in shape_text.split(",")) if shape_text else ()
        count = int(np.prod(shape)) if shape else 1
        offset = int(offset_text)
        tensors[name] = np.frombuffer(raw, dtype=_DTYPE, count=count, offset=offset).reshape(shape).astype(np.float64)

    pe_values = tensors.pop(_PE_BUFFER, None)
    spec = ModelSpec(**meta["spec"])
    model = FTTransformer(spec, pe=pe_values, params=tensors)
    model.target_mean = meta["target_mean"]
    model.target_std = meta["target_std"]
    return model
