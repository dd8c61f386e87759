"""Complex (k,t)-space containers, vectorization layout, and unitary DFT operators.

Conventions shared by every module in the package:

* A dynamic series is a complex ``(n_f, n_p, n_fr)`` array: frequency
  encodes, phase encodes, frames.
* Frames vectorize column-major (phase-encode columns stacked one below
  the other), so the matrix form of a series is ``(n_k, n_fr)`` with
  ``n_k = n_f * n_p`` and column ``t`` equal to the vectorized frame ``t``.
* k-space is stored centred: the DC bin of every frame sits at index
  ``(n_f // 2, n_p // 2)``.
* Every DFT is unitarily normalized (``1/sqrt(N)``), so all transforms
  preserve Frobenius norm and round-trip exactly.
"""

from dataclasses import dataclass

import numpy as np

FORWARD = "forward"
INVERSE = "inverse"


@dataclass(frozen=True)
class DataDims:
    """Grid sizes of a dynamic series: frequency/phase encodes and frame count."""

    n_f: int
    n_p: int
    n_fr: int

    def __post_init__(self):
        for name in ("n_f", "n_p", "n_fr"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def n_k(self) -> int:
        return self.n_f * self.n_p

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_f, self.n_p, self.n_fr)

    @property
    def matrix_shape(self) -> tuple[int, int]:
        return (self.n_k, self.n_fr)


def as_tensor3(data, dims: DataDims | None = None) -> np.ndarray:
    """Validate and return a complex ``(n_f, n_p, n_fr)`` array.

    Checks dimensionality, optional expected sizes, and finiteness.
    """
    arr = np.asarray(data)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-way array, got shape {arr.shape}")
    if dims is not None and arr.shape != dims.shape:
        raise ValueError(f"shape {arr.shape} does not match dims {dims.shape}")
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError("array contains non-finite entries")
    return arr


def dims_of(tensor) -> DataDims:
    """DataDims of a 3-way array."""
    arr = np.asarray(tensor)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-way array, got shape {arr.shape}")
    return DataDims(*(int(s) for s in arr.shape))


def vectorize_frame(frame) -> np.ndarray:
    """Stack the columns of a single frame into one vector (column-major)."""
    arr = np.asarray(frame)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D frame, got shape {arr.shape}")
    return arr.ravel(order="F")


def devectorize_frame(vec, dims: DataDims) -> np.ndarray:
    """Inverse of :func:`vectorize_frame` for the given grid sizes."""
    arr = np.asarray(vec)
    if arr.ndim != 1 or arr.size != dims.n_k:
        raise ValueError(f"expected a vector of length {dims.n_k}, got shape {arr.shape}")
    return arr.reshape((dims.n_f, dims.n_p), order="F")


def tensor_to_matrix(tensor) -> np.ndarray:
    """Reshape an ``(n_f, n_p, n_fr)`` series into its ``(n_k, n_fr)`` matrix form."""
    arr = np.asarray(tensor)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-way array, got shape {arr.shape}")
    n_f, n_p, n_fr = arr.shape
    return arr.reshape((n_f * n_p, n_fr), order="F")


def matrix_to_tensor(matrix, dims: DataDims) -> np.ndarray:
    """Inverse of :func:`tensor_to_matrix`."""
    arr = np.asarray(matrix)
    if arr.shape != dims.matrix_shape:
        raise ValueError(f"expected shape {dims.matrix_shape}, got {arr.shape}")
    return arr.reshape(dims.shape, order="F")


def _check_direction(direction: str) -> None:
    if direction not in (FORWARD, INVERSE):
        raise ValueError(f"direction must be {FORWARD!r} or {INVERSE!r}, got {direction!r}")


def dft2_frames(tensor, direction: str = FORWARD) -> np.ndarray:
    """Unitary 2-D spatial DFT applied independently to each frame.

    The forward transform maps a centred image frame to centred k-space
    (DC bin at ``(n_f // 2, n_p // 2)``); the inverse undoes it exactly.
    """
    _check_direction(direction)
    arr = np.asarray(tensor)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-way array, got shape {arr.shape}")
    shifted = np.fft.ifftshift(arr, axes=(0, 1))
    if direction == FORWARD:
        out = np.fft.fft2(shifted, axes=(0, 1), norm="ortho")
    else:
        out = np.fft.ifft2(shifted, axes=(0, 1), norm="ortho")
    return np.fft.fftshift(out, axes=(0, 1))


def temporal_dft(matrix, direction: str = FORWARD) -> np.ndarray:
    """Unitary 1-D DFT along rows of an ``(n_k, n_fr)`` matrix.

    Each row is the length ``n_fr`` time series of one pixel; the temporal
    DC bin is column 0.
    """
    _check_direction(direction)
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if direction == FORWARD:
        return np.fft.fft(arr, axis=1, norm="ortho")
    return np.fft.ifft(arr, axis=1, norm="ortho")


def spatial_dft_matrix(matrix, dims: DataDims, direction: str = FORWARD) -> np.ndarray:
    """Per-frame 2-D DFT of a series given in matrix form."""
    return tensor_to_matrix(dft2_frames(matrix_to_tensor(matrix, dims), direction))


def navigator_columns(n_p: int, upsilon: int) -> range:
    """Indices of the ``upsilon`` central phase-encode columns.

    The band starts at ``(n_p - upsilon) // 2``; ties break toward lower
    indices.
    """
    if not 1 <= upsilon <= n_p:
        raise ValueError(f"upsilon must be in [1, {n_p}], got {upsilon}")
    start = (n_p - upsilon) // 2
    return range(start, start + upsilon)


def extract_navigator(tensor, upsilon: int) -> np.ndarray:
    """Gather the central low-frequency band of each frame into one column.

    Returns a ``(upsilon * n_f, n_fr)`` matrix whose column ``t`` stacks the
    ``upsilon`` central phase-encode columns (full frequency extent) of
    frame ``t``.
    """
    arr = np.asarray(tensor)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-way array, got shape {arr.shape}")
    n_f, n_p, n_fr = arr.shape
    cols = navigator_columns(n_p, upsilon)
    band = arr[:, cols.start:cols.stop, :]
    return band.reshape((n_f * upsilon, n_fr), order="F")
