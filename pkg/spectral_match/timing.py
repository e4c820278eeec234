"""Monotonic per-phase timer."""
from __future__ import annotations

import time
from contextlib import contextmanager
from typing import Dict, Iterator

PHASES = ("decomposition", "projection", "sort", "match")


class PhaseTimer:
    """Accumulates wall-clock microseconds per named phase."""

    def __init__(self) -> None:
        self.phases: Dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = (time.perf_counter() - start) * 1e6
            self.phases[name] = self.phases.get(name, 0.0) + elapsed

    @property
    def total(self) -> float:
        return sum(self.phases.values())

    def as_dict(self) -> Dict[str, float]:
        out = {name: round(self.phases.get(name, 0.0), 1) for name in PHASES}
        out["total"] = round(self.total, 1)
        return out


@contextmanager
def _noop() -> Iterator[None]:
    yield


def timed(timer: "PhaseTimer | None", name: str):
    return timer.phase(name) if timer is not None else _noop()
