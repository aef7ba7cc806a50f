import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, List, Optional, TypeVar

TItem = TypeVar("TItem")
TResult = TypeVar("TResult")

THREADS_ENV = "TRACKER_THREADS"


def positive_int(value: object, default: int) -> int:
    try:
        value_int = int(value)  # type: ignore[call-overload]
    except (TypeError, ValueError):
        return default
    return value_int if value_int > 0 else default


def worker_count(env: Optional[str] = None) -> int:
    """TRACKER_THREADS 限制内部并行度，缺省或非法时取可用核数"""
    cores = os.cpu_count() or 1
    raw = os.getenv(THREADS_ENV) if env is None else env
    return positive_int(raw, cores)


def ordered_map(fn: Callable[[TItem], TResult], items: Iterable[TItem], workers: Optional[int] = None) -> List[TResult]:
    """结果按输入顺序返回，与调度无关

    仿真逐步循环是纯 Python，执行时持有 GIL，多线程几乎没有加速。
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def write_json(path: str | Path, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False), encoding="utf-8")
    return path
