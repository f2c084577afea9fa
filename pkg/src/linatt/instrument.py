"""Per-invocation counters for multiply-accumulate and live-buffer accounting.

Accounting model: every matrix multiply records m*k*p MACCs and an
allocation of its m*p output; callers free intermediates once they are
logically dead; normalization (softmax / scalar division) is modeled as
in-place and records nothing. Live-float totals therefore track distinct
buffers, not transient arithmetic temporaries.

Counters are confined to a single forward invocation: install them with
``track()`` around exactly one mechanism or module call. Each thread sees
its own counter stack, so concurrent forwards do not interfere.
"""

import threading
from contextlib import contextmanager
from dataclasses import dataclass

from .errors import BudgetError

# Internal arithmetic is binary64; simulated budgets are charged at this width.
BYTES_PER_FLOAT = 8


@dataclass
class Counters:
    total_macc: int = 0
    live_floats: int = 0
    peak_live_floats: int = 0
    budget_bytes: int | None = None

    def add_macc(self, count: int):
        self.total_macc += count

    def alloc(self, count: int):
        """Account a pending buffer of `count` scalars.

        Raises BudgetError before the caller materializes the buffer, so a
        simulated out-of-memory never turns into a real one.
        """
        projected = self.live_floats + count
        if self.budget_bytes is not None and projected * BYTES_PER_FLOAT > self.budget_bytes:
            raise BudgetError(projected * BYTES_PER_FLOAT, self.budget_bytes)
        self.live_floats = projected
        if projected > self.peak_live_floats:
            self.peak_live_floats = projected

    def free(self, count: int):
        self.live_floats -= count


_active = threading.local()


def active_counters() -> Counters | None:
    stack = getattr(_active, "stack", None)
    return stack[-1] if stack else None


@contextmanager
def track(budget_bytes: int | None = None):
    """Install fresh Counters for the duration of one instrumented call."""
    counters = Counters(budget_bytes=budget_bytes)
    stack = getattr(_active, "stack", None)
    if stack is None:
        stack = _active.stack = []
    stack.append(counters)
    try:
        yield counters
    finally:
        stack.pop()


def alloc(count: int):
    """Account an allocation against the active counters, if any."""
    counters = active_counters()
    if counters is not None:
        counters.alloc(count)


def free(count: int):
    """Release previously accounted scalars on the active counters, if any."""
    counters = active_counters()
    if counters is not None:
        counters.free(count)


@contextmanager
def live(count: int):
    """Mark `count` scalars (e.g. a call's inputs) live for a scope."""
    counters = active_counters()
    if counters is None:
        yield
        return
    counters.alloc(count)
    try:
        yield
    finally:
        counters.free(count)


@contextmanager
def capped(budget_bytes: int | None):
    """Tighten the active counters' budget for a scope.

    Opens a fresh tracking scope when none is active, so a caller-supplied
    cap is enforced even on uninstrumented calls.
    """
    counters = active_counters()
    if counters is None:
        with track(budget_bytes=budget_bytes) as counters:
            yield counters
        return
    previous = counters.budget_bytes
    if budget_bytes is not None and (previous is None or budget_bytes < previous):
        counters.budget_bytes = budget_bytes
    try:
        yield counters
    finally:
        counters.budget_bytes = previous
