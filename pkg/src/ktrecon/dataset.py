"""Tensor file I/O and a synthetic dynamic phantom generator.

File format (extension ``.ckt``): an 8-byte magic tag ``CKTENS01``, one
dtype code byte (0 = complex stored as interleaved little-endian float32
real/imag pairs, 1 = uint8 mask), three little-endian uint32 grid sizes
``(n_f, n_p, n_fr)``, then the payload frame by frame, each frame in
row-major order. Data are float32 on disk and float64 in memory.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .tensors import DataDims, dft2_frames

MAGIC = b"CKTENS01"
DTYPE_COMPLEX = 0
DTYPE_MASK = 1
_HEADER = struct.Struct("<8sBIII")


class TensorFormatError(ValueError):
    """Raised on malformed tensor files; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def save_tensor(path, array) -> None:
    """Write a complex series or a uint8/bool mask to ``path``.

    Complex data are narrowed to float32 pairs on disk; masks are stored
    as single bytes.
    """
    arr = np.asarray(array)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-way array, got shape {arr.shape}")
    n_f, n_p, n_fr = arr.shape
    if np.issubdtype(arr.dtype, np.complexfloating) or np.issubdtype(arr.dtype, np.floating):
        code = DTYPE_COMPLEX
        payload = np.ascontiguousarray(np.moveaxis(arr.astype(np.complex64), 2, 0))
    elif arr.dtype == np.bool_ or np.issubdtype(arr.dtype, np.integer):
        code = DTYPE_MASK
        payload = np.ascontiguousarray(np.moveaxis(arr.astype(np.uint8), 2, 0))
    else:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    header = _HEADER.pack(MAGIC, code, n_f, n_p, n_fr)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def load_tensor(path, kind: str | None = None) -> np.ndarray:
    """Read a tensor file back into memory.

    ``kind`` may be ``"complex"`` or ``"mask"`` to enforce the stored dtype
    code. Complex payloads come back as complex128, masks as uint8.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise TensorFormatError("file shorter than header", len(blob))
    magic, code, n_f, n_p, n_fr = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}", 0)
    if code not in (DTYPE_COMPLEX, DTYPE_MASK):
        raise TensorFormatError(f"unknown dtype code {code}", len(MAGIC))
    if kind is not None:
        expected = {"complex": DTYPE_COMPLEX, "mask": DTYPE_MASK}.get(kind)
        if expected is None:
            raise ValueError(f"kind must be 'complex' or 'mask', got {kind!r}")
        if code != expected:
            raise TensorFormatError(f"dtype code {code} does not match requested kind {kind!r}",
                                    len(MAGIC))
    count = n_f * n_p * n_fr
    item = 8 if code == DTYPE_COMPLEX else 1
    expected_len = _HEADER.size + count * item
    if len(blob) != expected_len:
        raise TensorFormatError(
            f"payload length {len(blob) - _HEADER.size} does not match header "
            f"dims {n_f}x{n_p}x{n_fr} (expected {count * item} bytes)",
            min(len(blob), expected_len))
    raw = np.frombuffer(blob, dtype="<c8" if code == DTYPE_COMPLEX else np.uint8,
                        offset=_HEADER.size)
    arr = np.moveaxis(raw.reshape((n_fr, n_f, n_p)), 0, 2)
    if code == DTYPE_COMPLEX:
        return arr.astype(np.complex128)
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry of the synthetic cine phantom.

    A static smooth background (a broad body plus two smaller structures)
    with a bright annulus whose radius oscillates sinusoidally over time,
    mimicking periodic organ movement in an otherwise static scene.
    Boundaries carry a one-pixel linear ramp so the spectrum is not
    ringing-dominated.
    """

    dims: DataDims
    background_level: float = 0.9
    ring_center: tuple[float, float] | None = None  # defaults to the grid centre
    ring_radius: float = 14.0
    ring_amplitude: float = 3.0
    ring_period: int = 4
    ring_thickness: float = 4.0
    ring_level: float = 1.0
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.ring_period < 2:
            raise ValueError(f"ring_period must be >= 2, got {self.ring_period}")
        if not 0 <= self.ring_amplitude < self.ring_radius:
            raise ValueError("ring_amplitude must satisfy 0 <= amplitude < ring_radius")
        if self.ring_thickness <= 0:
            raise ValueError("ring_thickness must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")

    @property
    def center(self) -> tuple[float, float]:
        if self.ring_center is not None:
            return self.ring_center
        return ((self.dims.n_f - 1) / 2.0, (self.dims.n_p - 1) / 2.0)


def generate_phantom(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """Render the phantom and its (k,t)-space data.

    Returns ``(image, kspace)``. ``kspace`` is the per-frame forward DFT of
    the image plus complex white noise of standard deviation
    ``spec.noise_std``. Deterministic for a fixed seed; with zero noise the
    pixel time series repeat with the ring period.
    """
    dims = spec.dims
    rows, cols = np.meshgrid(np.arange(dims.n_f), np.arange(dims.n_p), indexing="ij")
    cr, cc = spec.center
    dist = np.hypot(rows - cr, cols - cc)

    scale = min(dims.n_f, dims.n_p)
    body = np.exp(-0.5 * (dist / (0.38 * scale)) ** 2)
    organ_a = 0.5 * np.exp(-0.5 * (np.hypot(rows - cr + 0.28 * scale,
                                            cols - cc - 0.19 * scale) / (0.08 * scale)) ** 2)
    organ_b = 0.4 * np.exp(-0.5 * (np.hypot(rows - cr - 0.22 * scale,
                                            cols - cc + 0.25 * scale) / (0.11 * scale)) ** 2)
    background = spec.background_level * (body + organ_a + organ_b)

    image = np.empty(dims.shape, dtype=np.complex128)
    half = spec.ring_thickness / 2.0
    for t in range(dims.n_fr):
        radius = spec.ring_radius + spec.ring_amplitude * np.sin(2.0 * np.pi * t / spec.ring_period)
        ring = (np.clip(dist - (radius - half) + 0.5, 0.0, 1.0)
                * np.clip((radius + half) - dist + 0.5, 0.0, 1.0))
        image[:, :, t] = background + spec.ring_level * ring

    kspace = dft2_frames(image, "forward")
    if spec.noise_std > 0:
        rng = np.random.default_rng(spec.seed)
        noise = rng.standard_normal(dims.shape) + 1j * rng.standard_normal(dims.shape)
        kspace = kspace + spec.noise_std / np.sqrt(2.0) * noise
    return image, kspace
