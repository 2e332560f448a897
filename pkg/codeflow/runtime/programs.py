"""Program lookup.

A bare name is searched for as <name>.cft in:
1. settings.programs_dir - deployment programs
2. codeflow/programs     - built-in programs
Anything that looks like a path (a separator, or a .cft suffix) is opened as-is.
"""

import logging
import os
from pathlib import Path

from codeflow.cft import Module, parse_module
from codeflow.config import settings
from codeflow.errors import ConfigError

logger = logging.getLogger(__name__)

BUILTIN_DIR = Path(__file__).resolve().parent.parent / "programs"
SUFFIX = ".cft"


def find_program(name: str) -> Path:
    if name.endswith(SUFFIX) or os.sep in name or "/" in name:
        path = Path(name)
        if not path.is_file():
            raise ConfigError(f"Program not found: {name}")
        return path
    for directory in (Path(settings.programs_dir), BUILTIN_DIR):
        path = directory / f"{name}{SUFFIX}"
        if path.is_file():
            return path
    raise ConfigError(f"Program not found: {name}")


def list_programs() -> list[str]:
    """Names resolvable by find_program, deployment programs first."""
    names = []
    for directory in (Path(settings.programs_dir), BUILTIN_DIR):
        if directory.is_dir():
            names.extend(p.stem for p in sorted(directory.glob(f"*{SUFFIX}")) if p.stem not in names)
    return names


def load_program(name: str) -> Module:
    """Resolve and parse a program (raises CftError on bad text)."""
    path = find_program(name)
    logger.info(f"Loading program {name} from {path}")
    return parse_module(path.read_bytes())
