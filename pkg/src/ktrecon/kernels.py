"""Landmark selection from navigator data and kernel Gram matrices.

Landmarks are a small subset of navigator columns chosen by greedy
farthest-point (min-max distance) selection; they anchor the kernel
dictionary whose Gram matrices drive the regression model.
"""

from dataclasses import dataclass

import numpy as np


class NumericalDegeneracyError(RuntimeError):
    """A Gram matrix failed its positive-semidefiniteness check."""


@dataclass(frozen=True)
class GaussianKernel:
    """``exp(-(x - y)^H (x - y) / sigma2)``; real-valued and Hermitian-PSD."""

    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")


@dataclass(frozen=True)
class PolynomialKernel:
    """``(scale * x^H y + offset) ** degree``."""

    degree: int
    offset: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"degree must be a positive integer, got {self.degree}")
        if self.offset <= 0 or self.scale <= 0:
            raise ValueError("offset and scale must be positive")


KernelSpec = GaussianKernel | PolynomialKernel


@dataclass(frozen=True)
class LandmarkSet:
    """Selected navigator columns: the ``(nu, n_l)`` matrix and source indices."""

    matrix: np.ndarray
    indices: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("landmark indices must be distinct")
        if self.matrix.ndim != 2 or self.matrix.shape[1] != len(self.indices):
            raise ValueError("landmark matrix must have one column per index")

    @property
    def n_l(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class KernelDictionary:
    """Kernel specs together with their ``(n_l, n_l)`` Gram matrices."""

    specs: tuple[KernelSpec, ...]
    grams: tuple[np.ndarray, ...]

    @property
    def m(self) -> int:
        return len(self.specs)

    @property
    def n_l(self) -> int:
        return self.grams[0].shape[0]


def select_landmarks(navigators, n_l: int) -> LandmarkSet:
    """Greedy min-max (farthest-point) selection of ``n_l`` columns.

    Seeds with the column farthest from the column mean; each further pick
    maximizes the minimum Euclidean distance to the already selected set.
    All ties break toward the lowest index, so the result is deterministic.
    """
    nav = np.asarray(navigators, dtype=np.complex128)
    if nav.ndim != 2:
        raise ValueError(f"expected a 2-D navigator matrix, got shape {nav.shape}")
    n_fr = nav.shape[1]
    if not 1 <= n_l <= n_fr:
        raise ValueError(f"n_l must be in [1, {n_fr}], got {n_l}")

    mean = nav.mean(axis=1, keepdims=True)
    first = int(np.argmax(np.linalg.norm(nav - mean, axis=0)))
    chosen = [first]
    min_dist = np.linalg.norm(nav - nav[:, [first]], axis=0)
    min_dist[first] = -1.0
    while len(chosen) < n_l:
        nxt = int(np.argmax(min_dist))
        chosen.append(nxt)
        min_dist = np.minimum(min_dist, np.linalg.norm(nav - nav[:, [nxt]], axis=0))
        min_dist[chosen] = -1.0
    return LandmarkSet(matrix=nav[:, chosen].copy(), indices=tuple(chosen))


def kernel_value(spec: KernelSpec, x, y) -> complex:
    """Evaluate one kernel on a pair of vectors."""
    x = np.asarray(x, dtype=np.complex128).ravel()
    y = np.asarray(y, dtype=np.complex128).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if isinstance(spec, GaussianKernel):
        diff = x - y
        return complex(np.exp(-np.real(np.vdot(diff, diff)) / spec.sigma2))
    if isinstance(spec, PolynomialKernel):
        return complex((spec.scale * np.vdot(x, y) + spec.offset) ** spec.degree)
    raise TypeError(f"unknown kernel spec {spec!r}")


def _pairwise_sq_dist(landmarks: np.ndarray) -> np.ndarray:
    # direct differences: the norms-minus-inner identity cancels catastrophically
    # for near-duplicate columns and can break positive semidefiniteness
    n_l = landmarks.shape[1]
    sq = np.empty((n_l, n_l))
    for k in range(n_l):
        diff = landmarks - landmarks[:, [k]]
        sq[k] = np.sum(diff.real ** 2 + diff.imag ** 2, axis=0)
    return 0.5 * (sq + sq.T)


def _gram(spec: KernelSpec, landmarks: np.ndarray) -> np.ndarray:
    if isinstance(spec, GaussianKernel):
        gram = np.exp(-_pairwise_sq_dist(landmarks) / spec.sigma2).astype(np.complex128)
        np.fill_diagonal(gram, 1.0)
    else:
        inner = landmarks.conj().T @ landmarks
        gram = (spec.scale * inner + spec.offset) ** spec.degree
    return 0.5 * (gram + gram.conj().T)


def build_dictionary(landmarks: LandmarkSet, specs) -> KernelDictionary:
    """Assemble the Gram matrices for every kernel in ``specs``.

    Gaussian Grams are checked for positive semidefiniteness (minimum
    eigenvalue above ``-1e-8`` after symmetrization).
    """
    specs = tuple(specs)
    if not specs:
        raise ValueError("specs must be nonempty")
    grams = []
    for spec in specs:
        gram = _gram(spec, landmarks.matrix)
        if isinstance(spec, GaussianKernel):
            min_eig = float(np.linalg.eigvalsh(gram)[0])
            if min_eig < -1e-8:
                raise NumericalDegeneracyError(
                    f"Gaussian Gram has eigenvalue {min_eig:.3e} below -1e-8")
        grams.append(gram)
    return KernelDictionary(specs=specs, grams=tuple(grams))


def median_pairwise_distance(landmarks: LandmarkSet) -> float:
    """Median Euclidean distance between distinct landmark pairs.

    Duplicate landmarks (common when the source frames repeat periodically)
    are excluded so the bandwidth reflects the geometry of the distinct
    points; degenerate sets fall back to 1.0.
    """
    mat = landmarks.matrix
    if mat.shape[1] < 2:
        return 1.0
    dist = np.sqrt(_pairwise_sq_dist(mat)[np.triu_indices(mat.shape[1], k=1)])
    distinct = dist[dist > 1e-9 * max(float(dist.max()), 1.0)]
    if distinct.size == 0:
        return 1.0
    return float(np.median(distinct))


def default_specs(landmarks: LandmarkSet, m: int) -> list[KernelSpec]:
    """Stock kernel choices around the median-distance bandwidth.

    ``m = 1`` gives one Gaussian at the median bandwidth, ``m = 7`` five
    Gaussians spanning {1/4, 1/2, 1, 2, 4} times the median bandwidth plus
    degree-1 and degree-2 polynomials, and ``m = 3`` the middle three
    Gaussians (the desk-scale grid of the command-line tool).
    """
    sigma0 = median_pairwise_distance(landmarks)
    sigma0_sq = sigma0 ** 2
    if m == 1:
        return [GaussianKernel(sigma0_sq)]
    if m == 3:
        return [GaussianKernel(f * sigma0_sq) for f in (0.5, 1.0, 2.0)]
    if m == 7:
        gaussians = [GaussianKernel(f * sigma0_sq) for f in (0.25, 0.5, 1.0, 2.0, 4.0)]
        polys = [PolynomialKernel(degree=1, offset=1.0, scale=1.0 / sigma0_sq),
                 PolynomialKernel(degree=2, offset=1.0, scale=1.0 / sigma0_sq)]
        return gaussians + polys
    raise ValueError(f"unsupported kernel count {m} (choose 1, 3, or 7)")
