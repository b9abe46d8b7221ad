"""Small shared helpers: number formatting, worker counts, label encoding."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def fmt(x):
    """Format a float at 17 significant digits (round-trips exactly)."""
    return format(float(x), ".17g")


def worker_count():
    """Worker cap from ``FINE_THREADS``; defaults to the logical core count."""
    raw = os.environ.get("FINE_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n >= 1:
            return n
    return os.cpu_count() or 1


def ordered_map(fn, items, parallel):
    """Map ``fn`` over ``items`` and return results in input order.

    With ``parallel`` the calls run on a thread pool; each call must be a
    pure function of its argument so the result never depends on scheduling.
    """
    items = list(items)
    n = worker_count() if parallel else 1
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def encode_labels(raw):
    """Turn raw label strings into integer ids.

    Empty strings become ``None``. If every non-empty value is an integer
    the integers are kept; otherwise names are mapped to ids in sorted name
    order. Returns ``(labels, names)`` where ``names`` maps id -> name and is
    empty when the input was already numeric.
    """
    present = [s.strip() for s in raw if s is not None and s.strip() != ""]
    try:
        ints = {s: int(s) for s in present}
        names = {}
    except ValueError:
        uniq = sorted(set(present))
        ints = {s: i for i, s in enumerate(uniq)}
        names = {i: s for s, i in ints.items()}
    out = [None if s is None or s.strip() == "" else ints[s.strip()] for s in raw]
    return out, names


def readonly(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr
