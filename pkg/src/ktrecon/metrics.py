"""Reconstruction quality metrics.

All metrics except the plain normalized error operate on magnitude
images, per frame, and average across frames. Inputs are image-domain
series of shape ``(n_f, n_p, n_fr)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
HFEN_WINDOW = 15
HFEN_SIGMA = 1.5


@dataclass(frozen=True)
class MetricReport:
    nrmse: float
    ssim: float
    hfen: float
    m1: float
    m2: float

    def as_dict(self) -> dict[str, float]:
        return {"nrmse": self.nrmse, "ssim": self.ssim, "hfen": self.hfen,
                "m1": self.m1, "m2": self.m2}

    CSV_HEADER = ("nrmse", "ssim", "hfen", "m1", "m2")

    def csv_row(self) -> list[str]:
        return [repr(v) for v in (self.nrmse, self.ssim, self.hfen, self.m1, self.m2)]


def _pair(x_true, x_est):
    a = np.asarray(x_true)
    b = np.asarray(x_est)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def nrmse(x_true, x_est) -> float:
    """Frobenius-relative error on the complex entries."""
    a, b = _pair(x_true, x_est)
    denom = float(np.linalg.norm(a))
    if denom == 0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(a - b)) / denom


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    ax = np.arange(size) - half
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def ssim(x_true, x_est) -> float:
    """Mean structural similarity over frames of the magnitude images.

    Gaussian 11x11 window with sigma 1.5, stabilizing constants
    ``(0.01 D)^2`` and ``(0.03 D)^2`` where ``D`` is the maximum magnitude
    of the reference series; windows fully inside the frame only.
    """
    a, b = _pair(x_true, x_est)
    if a.ndim != 3:
        raise ValueError(f"expected 3-way series, got shape {a.shape}")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(f"frames must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    mag_a = np.abs(a)
    mag_b = np.abs(b)
    data_range = float(mag_a.max())
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    window = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    def local_mean(img):
        return signal.fftconvolve(img, window, mode="valid")

    scores = []
    for t in range(a.shape[2]):
        fa, fb = mag_a[:, :, t], mag_b[:, :, t]
        mu_a = local_mean(fa)
        mu_b = local_mean(fb)
        var_a = local_mean(fa * fa) - mu_a ** 2
        var_b = local_mean(fb * fb) - mu_b ** 2
        cov = local_mean(fa * fb) - mu_a * mu_b
        num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
        den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def log_kernel(size: int = HFEN_WINDOW, sigma: float = HFEN_SIGMA) -> np.ndarray:
    """Rotationally symmetric Laplacian-of-Gaussian filter, zero-sum."""
    half = (size - 1) / 2.0
    ax = np.arange(size) - half
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    rsq = xx ** 2 + yy ** 2
    gauss = np.exp(-rsq / (2.0 * sigma ** 2))
    gauss /= gauss.sum()
    kernel = gauss * (rsq - 2.0 * sigma ** 2) / sigma ** 4
    return kernel - kernel.mean()


def hfen(x_true, x_est) -> float:
    """High-frequency error norm: relative error after LoG filtering.

    The 15x15 sigma-1.5 kernel is applied per frame with symmetric
    boundary padding; the ratio is over all frames at once.
    """
    a, b = _pair(x_true, x_est)
    if a.ndim != 3:
        raise ValueError(f"expected 3-way series, got shape {a.shape}")
    kernel = log_kernel()

    def filtered(series):
        mag = np.abs(series)
        out = np.empty_like(mag)
        for t in range(mag.shape[2]):
            out[:, :, t] = ndimage.convolve(mag[:, :, t], kernel, mode="reflect")
        return out

    ref = filtered(a)
    denom = float(np.linalg.norm(ref))
    if denom <= 1e-12 * float(np.linalg.norm(np.abs(a))):
        raise ValueError("reference has zero high-frequency content")
    return float(np.linalg.norm(filtered(b) - ref)) / denom


def sharpness_m1(x) -> float:
    """Intensity variance per frame (sum of squared deviations), frame-averaged."""
    arr = np.abs(np.asarray(x))
    if arr.ndim != 3:
        raise ValueError(f"expected 3-way series, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty input")
    per_frame = [float(np.sum((arr[:, :, t] - arr[:, :, t].mean()) ** 2))
                 for t in range(arr.shape[2])]
    return float(np.mean(per_frame))


def sharpness_m2(x) -> float:
    """Energy of the forward-difference image gradient, frame-averaged."""
    arr = np.abs(np.asarray(x))
    if arr.ndim != 3:
        raise ValueError(f"expected 3-way series, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty input")
    per_frame = []
    for t in range(arr.shape[2]):
        frame = arr[:, :, t]
        dx = frame[1:, :] - frame[:-1, :]
        dy = frame[:, 1:] - frame[:, :-1]
        per_frame.append(float(np.sum(dx ** 2) + np.sum(dy ** 2)))
    return float(np.mean(per_frame))


def evaluate(x_true, x_est) -> MetricReport:
    """All metrics of one reconstruction against its reference."""
    return MetricReport(nrmse=nrmse(x_true, x_est),
                        ssim=ssim(x_true, x_est),
                        hfen=hfen(x_true, x_est),
                        m1=sharpness_m1(x_est),
                        m2=sharpness_m2(x_est))
