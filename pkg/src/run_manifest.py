"""
Run manifests and result persistence.

Every JSON file written by the CLI has the shape
``{"manifest": {...}, "result": {...}}``. Wall time and the worker count
are kept out of the result file so identical runs produce identical bytes
whatever ``--threads`` was; they go to a ``<out>.timing.json`` sidecar
instead.
"""

import json
import logging
import os
import subprocess
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .errors import ConfigError

logger = logging.getLogger(__name__)

TOOL_NAME = 'cokernel-lab'
RNG_ID = 'PCG64/SeedSequence'


def git_describe() -> str:
    """``git describe`` of the source tree, or 'unknown' outside a checkout."""
    try:
        result = subprocess.run(
            ['git', 'describe', '--always', '--dirty', '--tags'],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError) as e:
        logger.debug(f"git describe failed: {e}")
        return 'unknown'
    if result.returncode != 0:
        return 'unknown'
    return result.stdout.strip() or 'unknown'


@dataclass
class RunManifest:
    """What produced an output file, enough to produce it again."""
    command: str
    argv: List[str]
    config: Dict[str, Any]
    tool_version: str = __version__
    rng: str = RNG_ID
    numpy_version: str = np.__version__
    git: str = field(default_factory=git_describe)
    wall_time: Optional[float] = None
    threads: Optional[int] = None

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        data = {
            'tool': TOOL_NAME,
            'tool_version': self.tool_version,
            'command': self.command,
            'argv': list(self.argv),
            'config': self.config,
            'rng': self.rng,
            'numpy_version': self.numpy_version,
            'git': self.git,
        }
        if include_timing:
            data['wall_time'] = self.wall_time
            data['threads'] = self.threads
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunManifest':
        try:
            return cls(
                command=data['command'],
                argv=list(data['argv']),
                config=dict(data['config']),
                tool_version=data.get('tool_version', __version__),
                rng=data.get('rng', RNG_ID),
                numpy_version=data.get('numpy_version', np.__version__),
                git=data.get('git', 'unknown'),
                wall_time=data.get('wall_time'),
                threads=data.get('threads'),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed manifest: {e}")


def dumps(payload: Dict[str, Any]) -> str:
    """Canonical JSON text: sorted keys, UTF-8, newline-terminated."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_result(path: Optional[str], manifest: RunManifest, result: Dict[str, Any]) -> str:
    """
    Write ``{"manifest", "result"}`` to ``path`` (stdout when None or '-').

    Returns:
        The JSON text written
    """
    text = dumps({'manifest': manifest.to_dict(), 'result': result})
    if path is None or path == '-':
        sys.stdout.write(text)
    else:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        logger.info(f"Wrote {path}")
    return text


def write_timing(path: Optional[str], manifest: RunManifest) -> Optional[str]:
    """Sidecar with the manifest and wall time, next to ``path``."""
    if path is None or path == '-':
        return None
    sidecar = f"{path}.timing.json"
    with open(sidecar, 'w', encoding='utf-8') as f:
        f.write(dumps(manifest.to_dict(include_timing=True)))
    return sidecar


def write_csv(path: str, df: pd.DataFrame) -> None:
    """CSV projection of a result table."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    df.to_csv(path, index=False, encoding='utf-8')
    logger.info(f"Wrote {len(df)} rows to {path}")


def read_result(path: str) -> Tuple[Optional[RunManifest], Dict[str, Any]]:
    """
    Load a file written by ``write_result``.

    Bare JSON objects without a manifest are accepted as results.
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    if 'result' in data and 'manifest' in data:
        return RunManifest.from_dict(data['manifest']), data['result']
    return None, data
