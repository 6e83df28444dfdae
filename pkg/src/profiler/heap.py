"""
Size-class allocator over a simulated address space.

Small requests (<= 512 bytes) are rounded up to a multiple of 16 and served
from per-class free lists, refilled by carving 4 KiB slabs out of one
contiguous arena. Larger requests get whole 4 KiB-aligned pages. Every
issued object has a header with a magic number; an address that is not
inside the arena (or a known page run), misaligned, or missing the magic is
treated as foreign and left alone.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..core.bootstrap import console
from ..core.constants import (
    DEFAULT_ARENA_BYTES,
    HEADER_MAGIC,
    MAX_SMALL_SIZE,
    PAGE_SIZE,
    SIZE_CLASS_STEP,
    SLAB_SIZE,
)

LARGE = "large"
DEFAULT_ARENA_BASE = 0x2000_0000


class OutOfMemoryError(MemoryError):
    pass


@dataclass
class ObjectHeader:
    magic: int
    size: int
    size_class: Optional[int]     # None for page-backed objects
    pages: int = 0


def size_class_for(size: int):
    if size < 0:
        raise ValueError("size must be non-negative")
    if size > MAX_SMALL_SIZE:
        return LARGE
    return max(SIZE_CLASS_STEP, -(-size // SIZE_CLASS_STEP) * SIZE_CLASS_STEP)


class PageStore:
    """Page provider for large objects; released runs are reused by page count."""

    def __init__(self, base: int, page_size: int = PAGE_SIZE):
        if base % page_size:
            raise ValueError("page store base must be page aligned")
        self.page_size = page_size
        self._next = base
        self._reuse: Dict[int, List[int]] = {}
        self.reused_runs = 0

    def map_pages(self, npages: int) -> int:
        runs = self._reuse.get(npages)
        if runs:
            self.reused_runs += 1
            return runs.pop()
        addr = self._next
        self._next += npages * self.page_size
        return addr

    def unmap_pages(self, address: int, npages: int) -> None:
        self._reuse.setdefault(npages, []).append(address)


@dataclass
class HeapLayout:
    base: int = DEFAULT_ARENA_BASE
    arena_bytes: int = DEFAULT_ARENA_BYTES
    slab_size: int = SLAB_SIZE
    page_size: int = PAGE_SIZE
    size_class_lists: Dict[int, List[int]] = field(default_factory=dict)
    headers: Dict[int, ObjectHeader] = field(default_factory=dict)
    slab_class: Dict[int, int] = field(default_factory=dict)
    diagnostics: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.base % self.slab_size:
            raise ValueError("arena base must be slab aligned")
        self._bump = self.base
        self.classes = list(range(SIZE_CLASS_STEP, MAX_SMALL_SIZE + 1, SIZE_CLASS_STEP))
        for c in self.classes:
            self.size_class_lists.setdefault(c, [])
        self._class_locks = {c: threading.Lock() for c in self.classes}
        self._arena_lock = threading.Lock()
        self._large_lock = threading.Lock()
        large_base = -(-self.small_end // self.page_size) * self.page_size
        self.large = PageStore(large_base, self.page_size)
        self.large_objects: Dict[int, ObjectHeader] = {}

    @property
    def small_end(self) -> int:
        return self.base + self.arena_bytes

    def in_small_region(self, address: int) -> bool:
        return self.base <= address < self.small_end

    def _count(self, key: str) -> None:
        self.diagnostics[key] = self.diagnostics.get(key, 0) + 1

    # -----------------------------
    # Allocation
    # -----------------------------
    def _carve_slab(self, size_class: int) -> None:
        with self._arena_lock:
            if self._bump + self.slab_size > self.small_end:
                raise OutOfMemoryError(
                    f"arena exhausted ({self.arena_bytes} bytes) serving class {size_class}"
                )
            slab = self._bump
            self._bump += self.slab_size
        self.slab_class[slab] = size_class
        n = self.slab_size // size_class
        # reversed so pops hand out ascending addresses
        self.size_class_lists[size_class].extend(
            slab + i * size_class for i in range(n - 1, -1, -1)
        )

    def allocate(self, size: int) -> int:
        cls = size_class_for(size)
        if cls == LARGE:
            npages = -(-size // self.page_size)
            with self._large_lock:
                addr = self.large.map_pages(npages)
                header = ObjectHeader(HEADER_MAGIC, size, None, npages)
                self.large_objects[addr] = header
                self.headers[addr] = header
            return addr

        with self._class_locks[cls]:
            free = self.size_class_lists[cls]
            if not free:
                self._carve_slab(cls)
            addr = free.pop()
            self.headers[addr] = ObjectHeader(HEADER_MAGIC, size, cls)
        return addr

    # -----------------------------
    # Release
    # -----------------------------
    def _owned_small(self, address: int) -> Optional[int]:
        if not self.in_small_region(address):
            return None
        slab = address - (address - self.base) % self.slab_size
        cls = self.slab_class.get(slab)
        if cls is None or (address - slab) % cls:
            return None
        return cls

    def deallocate(self, address: int) -> Optional[int]:
        """Size of the released object, or None when the address is foreign."""
        cls = self._owned_small(address)
        if cls is not None:
            with self._class_locks[cls]:
                header = self.headers.get(address)
                if header is None or header.magic != HEADER_MAGIC:
                    return self._foreign(address)
                header.magic = 0
                del self.headers[address]
                self.size_class_lists[cls].append(address)
            return header.size

        if address % self.page_size:
            return self._foreign(address)
        with self._large_lock:
            header = self.large_objects.get(address)
            if header is None or header.magic != HEADER_MAGIC:
                return self._foreign(address)
            header.magic = 0
            del self.large_objects[address]
            self.headers.pop(address, None)
            self.large.unmap_pages(address, header.pages)
        return header.size

    def _foreign(self, address: int) -> None:
        self._count("foreign_free")
        console("Heap", f"ignoring foreign free of {address:#x}")
        return None

    def owns(self, address: int) -> bool:
        header = self.headers.get(address)
        return header is not None and header.magic == HEADER_MAGIC

    def live_objects(self) -> int:
        return len(self.headers)
