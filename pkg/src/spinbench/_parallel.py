import os


def max_workers() -> int:
    """Thread cap for independent sweeps, from ``SPINBENCH_THREADS``."""
    raw = os.environ.get("SPINBENCH_THREADS", "").strip()
    if not raw:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SPINBENCH_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)
