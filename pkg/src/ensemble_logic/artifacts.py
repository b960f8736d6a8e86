from __future__ import annotations

import hashlib
import json
import pathlib
from typing import Dict, Mapping, Optional

from .config import RunConfig
from .model import EnsembleLogicError

from . import __version__


class ArtifactError(EnsembleLogicError):
    """Raised when run provenance cannot be recorded."""


def _sha256_file(path: pathlib.Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(8192), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def input_hashes(inputs: Mapping[str, Optional[pathlib.Path]]) -> Dict[str, Dict[str, str]]:
    """Hash every named input file; missing optional inputs are skipped."""
    hashes: Dict[str, Dict[str, str]] = {}
    for role, path in sorted(inputs.items()):
        if path is None:
            continue
        if not path.is_file():
            raise ArtifactError(f"Input {role} is not a file: {path}")
        hashes[role] = {"file": path.name, "sha256": _sha256_file(path)}
    return hashes


def write_metadata(
    target: pathlib.Path,
    *,
    inputs: Mapping[str, Optional[pathlib.Path]],
    config: RunConfig,
    converged: bool,
) -> pathlib.Path:
    """Record input checksums and the resolved config hash next to the estimates.

    Only file names (never absolute paths) are stored so the document is
    identical across checkouts.
    """
    metadata = {
        "tool_version": __version__,
        "inputs": input_hashes(inputs),
        "config_sha256": sha256_text(config.to_yaml()),
        "converged": converged,
    }
    try:
        target.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ArtifactError(f"Cannot write metadata to {target}: {exc}") from exc
    return target
