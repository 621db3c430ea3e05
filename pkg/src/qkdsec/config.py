"""Central tolerances and limits.

Every module reads its thresholds from the active :class:`Config`, so a test
can tighten or loosen all of them at once with :func:`using_config`.
"""

from __future__ import annotations

import contextlib
import dataclasses
import threading
from typing import Iterator


@dataclasses.dataclass(frozen=True)
class Config:
    hermitian_tol: float = 1e-12
    psd_tol: float = 1e-10
    trace_tol: float = 1e-8
    prob_sum_tol: float = 1e-12
    eve_trace_tol: float = 1e-10
    povm_tol: float = 1e-10
    commute_tol: float = 1e-10
    pinv_tol: float = 1e-12
    # cyclic Jacobi
    jacobi_max_sweeps: int = 100
    jacobi_tol: float = 1e-13
    # "lapack" (numpy.linalg.eigh) or "jacobi"
    eig_backend: str = "lapack"
    dim_cap: int = 4096


_local = threading.local()
_default = Config()


def get_config() -> Config:
    return getattr(_local, "config", _default)


def set_config(config: Config) -> None:
    """Replace the process-wide default configuration."""
    global _default
    _default = config


@contextlib.contextmanager
def using_config(**overrides) -> Iterator[Config]:
    """Temporarily override fields of the active config in this thread."""
    previous = getattr(_local, "config", None)
    cfg = dataclasses.replace(get_config(), **overrides)
    _local.config = cfg
    try:
        yield cfg
    finally:
        if previous is None:
            del _local.config
        else:
            _local.config = previous
