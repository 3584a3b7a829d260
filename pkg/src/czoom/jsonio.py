"""Canonical JSON output and a small order-preserving parallel map."""

import json
import math
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor

FLOAT_DECIMALS = 6


def canonicalize(obj):
    """Round floats to six decimals, recursively; tuples become lists."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite float {obj!r} cannot be serialized")
        v = round(obj, FLOAT_DECIMALS)
        return 0.0 if v == 0 else v
    if isinstance(obj, dict):
        return {str(k): canonicalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonicalize(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return canonicalize(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=None) -> str:
    return json.dumps(canonicalize(obj), sort_keys=True, indent=indent, ensure_ascii=False) + "\n"


def dump(obj, path, indent=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj, indent=indent))


def dump_lines(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(canonicalize(rec), sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def load_lines(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def parallel_map(fn, items, workers=1, threads=False):
    """``list(map(fn, items))``, optionally across a worker pool; order is kept."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    pool_cls = ThreadPoolExecutor if threads else ProcessPoolExecutor
    with pool_cls(max_workers=workers) as pool:
        return list(pool.map(fn, items))
