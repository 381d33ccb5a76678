"""Small shared helpers: worker pools and stable JSON bytes."""

import json
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Map ``fn`` over ``items`` preserving order, forking when jobs > 1.

    ``fn`` must be picklable (module-level function or partial of one).
    Results are identical to the sequential path; only wall time changes.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def dump_json_bytes(obj) -> bytes:
    """Deterministic human-readable JSON bytes (sorted keys, trailing newline)."""
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")
