import os


def max_workers() -> int:
    """Thread cap from ``SELECTOR_LAB_THREADS`` (default: one per CPU)."""
    raw = os.environ.get("SELECTOR_LAB_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1
