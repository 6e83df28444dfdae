"""
File side channel for sampled records.

Notifications of the same kind can coalesce, so the data itself travels
through an append-only temp file named `miniprof-<pid>`. The profiler
drains it whenever any allocation/copy notification arrives.

Line format (tab separated):
    seq  kind  bytes  python_fraction(6dp)  footprint  file  line
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Dict, List, Optional

from ..core.bootstrap import console, ensure_parent_dir
from ..core.config import channel_dir
from ..core.constants import CHANNEL_PREFIX, FRACTION_DIGITS
from ..core.types import LineId, Record, RecordKind


class ChannelError(OSError):
    pass


def encode_record(record: Record) -> str:
    return "\t".join(
        [
            str(record.seq),
            record.kind.value,
            str(record.bytes),
            f"{record.python_fraction:.{FRACTION_DIGITS}f}",
            str(record.footprint),
            record.line.file,
            str(record.line.line),
        ]
    )


def decode_record(text: str) -> Record:
    parts = text.rstrip("\n").split("\t")
    if len(parts) != 7:
        raise ValueError(f"expected 7 fields, got {len(parts)}")
    seq, kind, nbytes, frac, footprint, file_name, line = parts
    fraction = float(frac)
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"python_fraction out of range: {frac}")
    return Record(
        seq=int(seq),
        kind=RecordKind(kind),
        bytes=int(nbytes),
        python_fraction=fraction,
        footprint=int(footprint),
        line=LineId(file_name, int(line)),
    )


def default_channel_path(directory: Optional[str] = None) -> Path:
    base = directory or channel_dir() or tempfile.gettempdir()
    return Path(base) / f"{CHANNEL_PREFIX}-{os.getpid()}"


class Channel:
    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path is not None else default_channel_path()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w+", encoding="utf-8")
        self._last_appended = -1
        self._last_drained = -1
        self.diagnostics: Dict[str, int] = {}

    def _count(self, key: str) -> None:
        self.diagnostics[key] = self.diagnostics.get(key, 0) + 1

    @property
    def closed(self) -> bool:
        return self._fh is None

    def append_record(self, record: Record) -> None:
        if self._fh is None:
            raise ChannelError(f"channel {self.path} is closed")
        if record.seq <= self._last_appended:
            raise ValueError(
                f"record seq {record.seq} not after previous seq {self._last_appended}"
            )
        try:
            self._fh.seek(0, os.SEEK_END)
            self._fh.write(encode_record(record) + "\n")
            self._fh.flush()
        except OSError as e:
            self._count("write_errors")
            console("Channel", f"write failed for seq {record.seq}: {e}", force=True)
            return
        self._last_appended = record.seq

    def drain(self) -> List[Record]:
        if self._fh is None:
            raise ChannelError(f"channel {self.path} is closed")
        self._fh.flush()
        self._fh.seek(0)
        lines = self._fh.read().splitlines()
        self._fh.seek(0)
        self._fh.truncate()

        out: List[Record] = []
        for text in lines:
            if not text.strip():
                continue
            try:
                record = decode_record(text)
            except (ValueError, KeyError) as e:
                self._count("decode_errors")
                console("Channel", f"skipping undecodable line: {e}")
                continue
            if record.seq <= self._last_drained:
                self._count("out_of_order")
                continue
            self._last_drained = record.seq
            out.append(record)
        return out

    def close(self, remove: bool = True) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
        if remove:
            try:
                self.path.unlink()
            except FileNotFoundError:
                pass

    def __enter__(self) -> "Channel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_event_log(path, records: List[Record]) -> Path:
    p = ensure_parent_dir(path)
    p.write_text("".join(encode_record(r) + "\n" for r in records), encoding="utf-8")
    return p
