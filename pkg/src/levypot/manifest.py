"""Run manifests: resolved config echo, content hashes, output checksums.

Timestamps come from LEVYPOT_TIMESTAMP when set (so reruns can be
byte-identical end to end) and from the wall clock otherwise.
"""

from __future__ import annotations

import hashlib
import os
import time
from pathlib import Path

MANIFEST_NAME = "manifest.txt"


def _now() -> str:
    pinned = os.environ.get("LEVYPOT_TIMESTAMP")
    if pinned is not None:
        return pinned
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())


def sha256_file(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(out_dir, resolved_lines, outputs, started: str, finished: str) -> Path:
    out_dir = Path(out_dir)
    config_blob = "\n".join(resolved_lines).encode()
    lines = ["[manifest]",
             f"started={started}",
             f"finished={finished}",
             f"config_hash=sha256:{hashlib.sha256(config_blob).hexdigest()}",
             "[config]"]
    lines += list(resolved_lines)
    lines.append("[outputs]")
    for name in sorted(outputs):
        lines.append(f"{name}=sha256:{sha256_file(out_dir / name)}")
    path = out_dir / MANIFEST_NAME
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    sections: dict = {"manifest": {}, "config": [], "outputs": {}}
    current = "manifest"
    for line in path.read_text().splitlines():
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            continue
        if not line.strip():
            continue
        if current == "config":
            sections["config"].append(line)
        else:
            k, v = line.split("=", 1)
            sections[current][k] = v
    return sections


class ManifestCorruption(RuntimeError):
    pass


def verify_manifest(manifest_path) -> dict:
    """Re-hash the recorded outputs; raises on any mismatch."""
    path = Path(manifest_path)
    info = read_manifest(path)
    base = path.parent
    for name, recorded in info["outputs"].items():
        actual = f"sha256:{sha256_file(base / name)}"
        if actual != recorded:
            raise ManifestCorruption(
                f"{base / name}: checksum mismatch (recorded {recorded}, actual {actual})")
    return info


def timestamp() -> str:
    return _now()
