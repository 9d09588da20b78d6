"""
Artifact IO
JSONL reading/writing, atomic file replacement and the run manifest.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from typing import Iterable, List

from modules import __version__
from modules.schema import MissingArtifact

MANIFEST_NAME = "manifest.json"


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write to a temp file in the target directory, then rename over path"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dumps_record(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=True)


def write_jsonl(path: str, records: Iterable[dict]) -> int:
    lines = [dumps_record(r) for r in records]
    atomic_write_text(path, "".join(line + "\n" for line in lines))
    return len(lines)


def read_jsonl(path: str) -> List[dict]:
    if not os.path.exists(path):
        raise MissingArtifact(f"file not found: {path}")
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise MissingArtifact(f"{path}:{line_no}: invalid JSON ({e})") from e
    return records


def write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n")


def read_json(path: str):
    if not os.path.exists(path):
        raise MissingArtifact(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: str, command: str, config_dump: dict, config_hash: str,
                   inputs: Iterable[str] = (), outputs: Iterable[str] = ()) -> str:
    """
    Record what produced the artifacts in out_dir.

    Args:
        out_dir: Output directory
        command: Subcommand name
        config_dump: Resolved configuration as plain JSON data
        config_hash: SHA-256 of the canonical config dump
        inputs/outputs: File paths to hash

    Returns:
        Path of the written manifest
    """
    def _hashes(paths):
        return {p: sha256_file(p) for p in paths if p and os.path.exists(p)}

    manifest = {
        "command": command,
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config_hash": config_hash,
        "config": config_dump,
        "inputs": _hashes(inputs),
        "outputs": _hashes(outputs),
    }
    path = os.path.join(out_dir, MANIFEST_NAME)
    write_json(path, manifest)
    return path
