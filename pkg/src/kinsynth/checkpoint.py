"""Checkpoint container: named weight arrays plus a JSON config block,
wrapped with a content checksum so corruption is detected at load."""

from __future__ import annotations

import hashlib
import io
import json
from pathlib import Path

import torch

FORMAT = "kinsynth-ckpt-v1"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(payload: dict, config: dict, path: str | Path):
    """Serialize {config block, payload} with a sha256 over the content."""
    inner = io.BytesIO()
    torch.save({"config_json": json.dumps(config, sort_keys=True), "payload": payload}, inner)
    raw = inner.getvalue()
    digest = hashlib.sha256(raw).hexdigest()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        torch.save({"format": FORMAT, "sha256": digest, "content": raw}, fh)


def load_checkpoint(path: str | Path) -> tuple[dict, dict]:
    """Returns (config, payload); raises CheckpointError on corruption."""
    try:
        wrapper = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(wrapper, dict) or wrapper.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not a {FORMAT} checkpoint")
    raw = wrapper["content"]
    digest = hashlib.sha256(raw).hexdigest()
    if digest != wrapper["sha256"]:
        raise CheckpointError(
            f"checkpoint {path} failed its integrity check "
            f"(stored {wrapper['sha256'][:12]}, computed {digest[:12]})"
        )
    inner = torch.load(io.BytesIO(raw), map_location="cpu", weights_only=True)
    return json.loads(inner["config_json"]), inner["payload"]


def model_id(path: str | Path) -> str:
    """Short identifier for a checkpoint (prefix of its content checksum)."""
    with open(path, "rb") as fh:
        wrapper = torch.load(fh, map_location="cpu", weights_only=True)
    return str(wrapper.get("sha256", ""))[:12]
