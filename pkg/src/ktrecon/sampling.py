"""Under-sampling masks for (k,t)-space and the sampling operator.

Masks are uint8 arrays of the series shape with 1 marking an acquired
entry. Every generated mask keeps the navigator band (the ``upsilon``
central phase-encode columns) fully acquired in every frame.
"""

import numpy as np

from .tensors import DataDims, navigator_columns

GOLDEN_ANGLE_DEG = 111.246


class InfeasibleAccelerationError(ValueError):
    """Requested acceleration cannot be met with the always-on navigator lines."""


def cartesian_mask(dims: DataDims, acceleration: float, upsilon: int, seed: int = 0) -> np.ndarray:
    """Per-frame random phase-encode line selection at the given acceleration.

    Acquires full frequency-encode columns: the navigator band plus extra
    columns drawn without replacement from a centre-weighted distribution
    (probability proportional to ``1 / (1 + |j - centre|)``), re-drawn
    independently per frame from the seed stream ``seed + frame``.
    """
    if acceleration < 1:
        raise ValueError(f"acceleration must be >= 1, got {acceleration}")
    nav = navigator_columns(dims.n_p, upsilon)
    lines = int(round(dims.n_p / acceleration))
    if lines < upsilon:
        raise InfeasibleAccelerationError(
            f"acceleration {acceleration} leaves {lines} lines per frame, "
            f"fewer than the {upsilon} navigator lines")
    others = np.array([j for j in range(dims.n_p) if j not in nav])
    bits = np.zeros(dims.shape, dtype=np.uint8)
    bits[:, nav.start:nav.stop, :] = 1
    extra = lines - upsilon
    if extra and others.size:
        centre = (dims.n_p - 1) / 2.0
        weights = 1.0 / (1.0 + np.abs(others - centre))
        weights /= weights.sum()
        for t in range(dims.n_fr):
            rng = np.random.default_rng(seed + t)
            picked = rng.choice(others, size=extra, replace=False, p=weights)
            bits[:, picked, t] = 1
    return bits


def radial_mask(dims: DataDims, n_spokes_per_frame: int, upsilon: int, seed: int = 0) -> np.ndarray:
    """Golden-angle radial spokes rasterized onto the Cartesian grid.

    Each spoke is a straight line through the k-space centre
    ``(n_f // 2, n_p // 2)``, marked by nearest-grid-point stepping along
    its dominant axis. Spoke angles advance by the golden-angle increment
    and continue across frames, so the schedule is deterministic; ``seed``
    is accepted for interface symmetry but unused.
    """
    del seed
    if n_spokes_per_frame < 1:
        raise ValueError(f"n_spokes_per_frame must be >= 1, got {n_spokes_per_frame}")
    nav = navigator_columns(dims.n_p, upsilon)
    cr, cc = dims.n_f // 2, dims.n_p // 2
    bits = np.zeros(dims.shape, dtype=np.uint8)
    bits[:, nav.start:nav.stop, :] = 1
    for t in range(dims.n_fr):
        for s in range(n_spokes_per_frame):
            theta = np.deg2rad((t * n_spokes_per_frame + s) * GOLDEN_ANGLE_DEG)
            dr, dc = np.sin(theta), np.cos(theta)
            if abs(dc) >= abs(dr):
                cols = np.arange(dims.n_p)
                rows = np.rint(cr + (cols - cc) * dr / dc).astype(int)
                keep = (rows >= 0) & (rows < dims.n_f)
            else:
                rows = np.arange(dims.n_f)
                cols = np.rint(cc + (rows - cr) * dc / dr).astype(int)
                keep = (cols >= 0) & (cols < dims.n_p)
            bits[rows[keep], cols[keep], t] = 1
    return bits


def apply_sampling(mask, tensor) -> np.ndarray:
    """Entrywise product with the mask bits (the sampling operator)."""
    mask = np.asarray(mask)
    arr = np.asarray(tensor)
    if mask.shape != arr.shape:
        raise ValueError(f"mask shape {mask.shape} does not match data shape {arr.shape}")
    return arr * (mask != 0)


def acceleration_rate(mask) -> float:
    """Ratio of grid entries to acquired entries."""
    mask = np.asarray(mask)
    acquired = int(np.count_nonzero(mask))
    if acquired == 0:
        raise ValueError("mask acquires no entries")
    return mask.size / acquired
