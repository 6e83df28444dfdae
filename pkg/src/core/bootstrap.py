import sys
from pathlib import Path

from .config import verbose


def ensure_parent_dir(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def console(tag: str, message: str, force: bool = False) -> None:
    """Tagged diagnostic line on stderr. Quiet unless MINIPROF_VERBOSE is set or force=True."""
    if force or verbose():
        print(f"[{tag}] {message}", file=sys.stderr, flush=True)
