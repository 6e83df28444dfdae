import random
import threading

import pytest

from src.core.constants import HEADER_MAGIC
from src.profiler.heap import LARGE, HeapLayout, OutOfMemoryError, size_class_for


@pytest.mark.parametrize(
    "size, expected",
    [(0, 16), (1, 16), (16, 16), (17, 32), (100, 112), (512, 512), (513, LARGE)],
)
def test_size_class_for(size, expected):
    assert size_class_for(size) == expected


def test_small_objects_are_distinct_and_inside_the_arena():
    heap = HeapLayout()
    a = heap.allocate(100)
    b = heap.allocate(100)

    assert a != b
    assert heap.in_small_region(a) and heap.in_small_region(b)
    assert heap.headers[a].size_class == 112
    assert abs(a - b) >= 112


def test_large_objects_are_page_aligned_with_a_valid_header():
    heap = HeapLayout()
    addr = heap.allocate(8192)

    assert addr % 4096 == 0
    assert not heap.in_small_region(addr)
    assert heap.headers[addr].magic == HEADER_MAGIC
    assert heap.large_objects[addr].pages == 2


def test_released_small_object_is_reused():
    heap = HeapLayout()
    a = heap.allocate(40)

    assert heap.deallocate(a) == 40
    assert heap.allocate(48) == a


def test_released_pages_are_reused_by_page_count():
    heap = HeapLayout()
    a = heap.allocate(10_000)
    heap.deallocate(a)
    b = heap.allocate(9_000)

    assert a == b
    assert heap.large.reused_runs == 1


def test_unaligned_address_outside_the_arena_is_foreign():
    heap = HeapLayout()

    assert heap.deallocate(0x7 + heap.small_end * 3) is None
    assert heap.diagnostics["foreign_free"] == 1


def test_misaligned_address_inside_a_slab_is_foreign():
    heap = HeapLayout()
    a = heap.allocate(64)

    assert heap.deallocate(a + 8) is None
    assert heap.owns(a)


def test_double_release_is_refused():
    heap = HeapLayout()
    a = heap.allocate(200)
    big = heap.allocate(5000)

    assert heap.deallocate(a) == 200
    assert heap.deallocate(a) is None
    assert heap.deallocate(big) == 5000
    assert heap.deallocate(big) is None


def test_ten_foreign_frees_before_any_allocation():
    heap = HeapLayout()
    for i in range(10):
        assert heap.deallocate(0x1234 + i * 4096) is None

    assert heap.live_objects() == 0
    assert heap.diagnostics["foreign_free"] == 10


def test_arena_exhaustion_raises_out_of_memory():
    heap = HeapLayout(arena_bytes=8192)
    heap.allocate(512)
    for _ in range(7):
        heap.allocate(512)
    heap.allocate(512)   # second slab
    for _ in range(7):
        heap.allocate(512)

    with pytest.raises(OutOfMemoryError):
        heap.allocate(512)


def test_fuzz_million_operations_with_foreign_frees():
    # GIVEN a seeded mix of allocations, releases and foreign addresses
    rng = random.Random(2024)
    heap = HeapLayout()
    live = {}
    issued = set()
    released_total = 0
    allocated_total = 0
    foreign = 0

    # WHEN
    for _ in range(1_000_000):
        roll = rng.random()
        if roll < 0.45 or not live:
            size = rng.choice((rng.randint(0, 512), rng.randint(513, 20_000)))
            addr = heap.allocate(size)
            assert addr not in live
            live[addr] = size
            issued.add(addr)
            allocated_total += size
        elif roll < 0.88:
            addr = rng.choice(list(live)) if len(live) < 64 else next(iter(live))
            size = live.pop(addr)
            assert heap.deallocate(addr) == size
            released_total += size
        else:
            addr = rng.randrange(0, 1 << 40)
            if addr in live:
                continue
            assert heap.deallocate(addr) is None
            foreign += 1

    # THEN
    assert foreign >= 10_000
    assert heap.diagnostics["foreign_free"] == foreign
    assert heap.live_objects() == len(live)
    assert set(heap.headers) == set(live)
    assert set(live) <= issued
    assert allocated_total - released_total == sum(live.values())


def _extent(heap, addr):
    header = heap.headers[addr]
    if header.size_class is None:
        return header.pages * heap.page_size
    return header.size_class


def test_concurrent_threads_never_share_or_double_release_objects():
    # GIVEN eight threads hammering one heap with mixed sizes
    heap = HeapLayout()
    workers = 8
    start = threading.Barrier(workers)
    held = [[] for _ in range(workers)]
    errors = []

    def churn(idx):
        rng = random.Random(idx)
        mine = held[idx]
        try:
            start.wait()
            for _ in range(3000):
                if mine and rng.random() < 0.45:
                    addr = mine.pop(rng.randrange(len(mine)))
                    if heap.deallocate(addr) is None:
                        errors.append(f"release of {addr:#x} was refused")
                else:
                    size = rng.choice([1, 24, 100, 300, 512, 513, 5000])
                    mine.append(heap.allocate(size))
        except Exception as exc:  # surfaced on the main thread below
            errors.append(repr(exc))

    # WHEN
    threads = [threading.Thread(target=churn, args=(i,)) for i in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    # THEN
    assert errors == []
    live = [addr for mine in held for addr in mine]
    assert len(set(live)) == len(live)
    assert heap.live_objects() == len(live)
    spans = sorted((addr, addr + _extent(heap, addr)) for addr in live)
    assert all(end <= nxt for (_, end), (nxt, _) in zip(spans, spans[1:]))
    assert heap.diagnostics.get("foreign_free", 0) == 0
