import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_THREADS = "HILBERT_SIM_THREADS"


def resolve_workers(n_nodes, requested=None):
    """Worker count for per-node passes; 0 or unset means automatic."""
    if requested is None:
        raw = os.environ.get(ENV_THREADS, "").strip()
        requested = int(raw) if raw else 0
    if requested < 0:
        raise ValueError(f"{ENV_THREADS} must be >= 0")
    if requested == 0:
        # small grids are faster on one thread than with dispatch overhead
        return 1 if n_nodes < 2048 else min(os.cpu_count() or 1, 8)
    return requested


def map_node_chunks(fn, n_nodes, workers=1):
    """Apply ``fn(slice)`` over contiguous node ranges and concatenate results.

    ``fn`` must only touch the nodes in its slice; results are then identical
    for any partitioning.
    """
    if workers <= 1 or n_nodes < 2 * workers:
        return fn(slice(0, n_nodes))
    bounds = np.linspace(0, n_nodes, workers + 1).astype(int)
    slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(fn, slices))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p) for p in zip(*parts))
    return np.concatenate(parts)
