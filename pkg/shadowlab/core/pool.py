"""
进程池

joblib 的薄封装：按输入顺序返回结果，归约在收集之后进行，
因此结果与进程数无关。
"""

from typing import Any, Callable, Iterable, List

from joblib import Parallel, delayed
from loguru import logger


class WorkerPool:
    """有序映射的进程池"""

    def __init__(self, workers: int = 1, backend: str = "loky"):
        if workers < 1:
            raise ValueError(f"进程数必须 ≥ 1: {workers}")
        self.workers = int(workers)
        self.backend = backend

    def map_ordered(self, func: Callable[[Any], Any], items: Iterable[Any]) -> List[Any]:
        """
        并行求 func(item)，结果顺序与输入一致

        workers=1 时在当前进程内顺序执行。
        """
        items = list(items)
        if self.workers == 1 or len(items) <= 1:
            return [func(item) for item in items]
        logger.debug(f"并行评估 {len(items)} 项，进程数 {self.workers}")
        return list(Parallel(n_jobs=self.workers, backend=self.backend)(delayed(func)(item) for item in items))

    def __repr__(self) -> str:
        return f"WorkerPool(workers={self.workers}, backend={self.backend!r})"
