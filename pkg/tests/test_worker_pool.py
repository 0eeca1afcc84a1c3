import math

import pytest

from app.handlers.worker_pool import parallel_map, resolve_workers


@pytest.mark.parametrize("workers,expected", [(None, 1), (0, 1), (-3, 1), (1, 1)])
def test_resolve_workers_floor(workers, expected):
    assert resolve_workers(workers) == expected


def test_resolve_workers_capped_by_cpu_count(monkeypatch):
    monkeypatch.setattr("app.handlers.worker_pool.os.cpu_count", lambda: 2)
    assert resolve_workers(16) == 2


def test_inline_map_keeps_order():
    assert parallel_map(abs, [-3, 2, -1]) == [3, 2, 1]
    assert parallel_map(abs, []) == []


def test_process_map_keeps_order():
    items = [float(k) for k in range(12)]
    assert parallel_map(math.sqrt, items, workers=2) == [math.sqrt(v) for v in items]
