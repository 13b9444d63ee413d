"""Fan work out over joblib workers with results kept in task order."""

from collections.abc import Callable, Iterable
from typing import Any, TypeVar

from joblib import Parallel, delayed

T = TypeVar("T")


def run_parallel(
    function: Callable[..., T], tasks: Iterable[tuple[Any, ...]], n_jobs: int = 1
) -> list[T]:
    """Call `function(*task)` for every task, serially when n_jobs is 1."""
    if n_jobs == 1:
        return [function(*task) for task in tasks]

    results: list[T] = Parallel(n_jobs=n_jobs)(
        delayed(function)(*task) for task in tasks
    )
    return results
