"""Multilinear factorization state, forward model, and objective.

The series matrix is modeled as a sum over kernel branches of a chain of
small factors applied to each kernel Gram and a sparse coefficient block:
``X ~ sum_m A1_m A2_m ... AQ_m K_m B_m``. The first factor lives in the
image domain; deeper factors are the blocks of block-diagonal stages and
stay small by construction. Coefficient blocks carry a per-column
sum-to-one affine constraint.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernels import KernelDictionary
from .sampling import apply_sampling
from .tensors import (DataDims, dft2_frames, matrix_to_tensor, spatial_dft_matrix,
                      temporal_dft, tensor_to_matrix)


class ConstraintViolationError(RuntimeError):
    """A factorization state violates one of its hard constraints."""


@dataclass(frozen=True)
class ModelConfig:
    """Sizes of the factor chain: kernel count, depth, and inner dimensions."""

    dims: DataDims
    n_l: int
    m: int = 1
    q: int = 1
    inner_dims: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_l < 1 or self.m < 1 or self.q < 1:
            raise ValueError("n_l, m, and q must be positive")
        if len(self.inner_dims) != self.q - 1:
            raise ValueError(f"inner_dims must have length q - 1 = {self.q - 1}, "
                             f"got {len(self.inner_dims)}")
        if any(d < 1 for d in self.inner_dims):
            raise ValueError("inner dimensions must be positive")

    @property
    def chain_dims(self) -> tuple[int, ...]:
        """``(d_0, d_1, ..., d_Q)`` with ``d_0 = n_k`` and ``d_Q = n_l``."""
        return (self.dims.n_k, *self.inner_dims, self.n_l)


@dataclass
class Hyperparams:
    """Regularization weights, proximal weights, and loop controls.

    The combination weight starts moderate and decays slowly: a full first
    step lets the randomly scaled factor chain see-saw against the
    coefficients, while a fast decay freezes the iteration long before the
    image settles.
    """

    lambda1: float = 1e-3   # sparsity of the coefficient blocks
    lambda2: float = 1.0    # coupling to the temporal spectrum
    lambda3: float = 1e-3   # sparsity of the temporal spectrum
    lambda4: float = 1e-3   # ridge on the factor chain
    tau_x: float = 1e-2
    tau_z: float = 1e-2
    tau_a: float = 1e-2
    tau_b: float = 1e-2
    gamma0: float = 0.3
    zeta: float = 0.02
    max_outer: int = 300
    tol_rel: float = 1e-5
    b_tol: float = 1e-6
    b_max_iter: int = 300

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4",
                     "tau_x", "tau_z", "tau_a", "tau_b"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.b_tol <= 0:
            raise ValueError("b_tol must be positive")
        if not 0 < self.gamma0 <= 1:
            raise ValueError("gamma0 must be in (0, 1]")
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must be in (0, 1)")
        if self.max_outer < 1 or self.b_max_iter < 1:
            raise ValueError("iteration caps must be positive")


def default_hyperparams(kspace, **overrides) -> Hyperparams:
    """Defaults with the spectrum threshold scaled to the data magnitude."""
    arr = np.asarray(kspace)
    scale = float(np.linalg.norm(arr)) / np.sqrt(arr.size)
    params = {"lambda3": 0.1 * scale}
    params.update(overrides)
    return Hyperparams(**params)


@dataclass
class FactorState:
    """All optimization variables of the inverse problem.

    ``a1`` stacks the ``m`` image-domain first factors side by side;
    ``a_blocks[q - 2][m]`` holds the block of stage ``q >= 2`` for kernel
    branch ``m`` (off-block entries are never stored); ``b_blocks[m]`` is
    the coefficient block of branch ``m`` whose columns each sum to one.
    """

    config: ModelConfig
    X: np.ndarray
    Z: np.ndarray
    a1: np.ndarray
    a_blocks: list[list[np.ndarray]] = field(default_factory=list)
    b_blocks: list[np.ndarray] = field(default_factory=list)

    def a1_slice(self, m: int) -> np.ndarray:
        d1 = self.config.chain_dims[1]
        return self.a1[:, m * d1:(m + 1) * d1]

    def copy(self) -> "FactorState":
        return FactorState(
            config=self.config,
            X=self.X.copy(),
            Z=self.Z.copy(),
            a1=self.a1.copy(),
            a_blocks=[[blk.copy() for blk in stage] for stage in self.a_blocks],
            b_blocks=[blk.copy() for blk in self.b_blocks],
        )

    def combine(self, half: "FactorState", gamma: float) -> "FactorState":
        """Convex combination ``gamma * half + (1 - gamma) * self``."""
        def mix(new, old):
            return gamma * new + (1.0 - gamma) * old

        return FactorState(
            config=self.config,
            X=mix(half.X, self.X),
            Z=mix(half.Z, self.Z),
            a1=mix(half.a1, self.a1),
            a_blocks=[[mix(hb, sb) for hb, sb in zip(hstage, sstage)]
                      for hstage, sstage in zip(half.a_blocks, self.a_blocks)],
            b_blocks=[mix(hb, sb) for hb, sb in zip(half.b_blocks, self.b_blocks)],
        )


def forward(state: FactorState, kernels: KernelDictionary) -> np.ndarray:
    """Model prediction ``sum_m A1_m A2_m ... AQ_m K_m B_m``.

    Evaluated right to left so each branch costs a sequence of small
    matrix products before the single image-sized one.
    """
    cfg = state.config
    _check_shapes(state, kernels)
    out = np.zeros(cfg.dims.matrix_shape, dtype=np.complex128)
    for m in range(cfg.m):
        term = kernels.grams[m] @ state.b_blocks[m]
        for stage in reversed(state.a_blocks):
            term = stage[m] @ term
        out += state.a1_slice(m) @ term
    return out


def assemble_blocks(state: FactorState, kernels: KernelDictionary,
                    cap: int = 2_000_000):
    """Dense big-matrix rendition of the chain (testing aid for small sizes).

    Returns ``(first, deeper, gram, coeffs)`` where ``first`` is the dense
    first stage, ``deeper`` the list of dense block-diagonal stages,
    ``gram`` the block-diagonal kernel matrix, and ``coeffs`` the stacked
    coefficient matrix; their product equals :func:`forward`.
    """
    cfg = state.config
    d1 = cfg.chain_dims[1]
    if cfg.dims.n_k * d1 * cfg.m > cap:
        raise ValueError(f"instance too large for dense assembly "
                         f"(n_k * d_1 * m = {cfg.dims.n_k * d1 * cfg.m} > cap {cap})")
    first = state.a1.copy()
    deeper = [scipy.linalg.block_diag(*[stage[m] for m in range(cfg.m)])
              for stage in state.a_blocks]
    gram = scipy.linalg.block_diag(*kernels.grams)
    coeffs = np.vstack(state.b_blocks)
    return first, deeper, gram, coeffs


def l1_norm(arr) -> float:
    """Entrywise sum of complex magnitudes."""
    return float(np.sum(np.abs(arr)))


def check_state(state: FactorState, mask, kspace,
                affine_tol: float = 1e-10, consistency_tol: float = 1e-9) -> None:
    """Raise unless the affine and data-consistency constraints hold."""
    for m, blk in enumerate(state.b_blocks):
        err = float(np.max(np.abs(blk.sum(axis=0) - 1.0)))
        if err > affine_tol:
            raise ConstraintViolationError(
                f"coefficient block {m} column sums off by {err:.3e}")
    sampled = np.asarray(mask) != 0
    k = spatial_dft_matrix(state.X, state.config.dims, "forward")
    k = matrix_to_tensor(k, state.config.dims)
    err = float(np.max(np.abs(k[sampled] - np.asarray(kspace)[sampled]), initial=0.0))
    if err > consistency_tol:
        raise ConstraintViolationError(f"sampled k-space entries off by {err:.3e}")


def objective(state: FactorState, kernels: KernelDictionary, mask, kspace,
              hp: Hyperparams, check: bool = True) -> float:
    """Full penalized objective value at the given state."""
    if check:
        check_state(state, mask, kspace)
    resid = state.X - forward(state, kernels)
    value = 0.5 * float(np.linalg.norm(resid) ** 2)
    value += hp.lambda1 * sum(l1_norm(blk) for blk in state.b_blocks)
    spectrum_resid = state.Z - temporal_dft(state.X, "forward")
    value += 0.5 * hp.lambda2 * float(np.linalg.norm(spectrum_resid) ** 2)
    value += hp.lambda3 * l1_norm(state.Z)
    ridge = float(np.linalg.norm(state.a1) ** 2)
    for stage in state.a_blocks:
        ridge += sum(float(np.linalg.norm(blk) ** 2) for blk in stage)
    value += 0.5 * hp.lambda4 * ridge
    return float(value)


def parameter_count(config: ModelConfig) -> tuple[int, int]:
    """Unknown counts of the deep chain versus the flat single-factor model."""
    cd = config.chain_dims
    chain = sum(cd[q - 1] * cd[q] for q in range(1, config.q + 1))
    n_general = config.m * (chain + config.dims.n_fr * config.n_l)
    n_q1 = config.m * (config.dims.n_k * config.n_l + config.dims.n_fr * config.n_l)
    return n_general, n_q1


def stored_parameter_count(state: FactorState) -> int:
    """Literal number of scalar unknowns held in the factor variables."""
    count = state.a1.size
    for stage in state.a_blocks:
        count += sum(blk.size for blk in stage)
    count += sum(blk.size for blk in state.b_blocks)
    return count


def zero_filled(kspace, mask) -> np.ndarray:
    """Image series from the acquired k-space with missing entries zeroed."""
    return dft2_frames(apply_sampling(mask, kspace), "inverse")


def init_state(config: ModelConfig, kernels: KernelDictionary, mask, kspace,
               seed: int = 0) -> FactorState:
    """Starting point: zero-filled image, its temporal spectrum, random chain.

    Factor entries are i.i.d. complex Gaussian with standard deviation
    ``1 / sqrt(d_{q-1})``; coefficient blocks start uniform so their
    columns sum to one exactly.
    """
    _check_kernels(config, kernels)
    rng = np.random.default_rng(seed)
    dims = config.dims
    x0 = tensor_to_matrix(zero_filled(kspace, mask))
    z0 = temporal_dft(x0, "forward")
    cd = config.chain_dims

    def crandn(rows, cols, scale):
        return scale / np.sqrt(2.0) * (rng.standard_normal((rows, cols))
                                       + 1j * rng.standard_normal((rows, cols)))

    a1 = crandn(dims.n_k, config.m * cd[1], 1.0 / np.sqrt(cd[0]))
    a_blocks = [[crandn(cd[q - 1], cd[q], 1.0 / np.sqrt(cd[q - 1]))
                 for _ in range(config.m)]
                for q in range(2, config.q + 1)]
    b_blocks = [np.full((config.n_l, dims.n_fr), 1.0 / config.n_l, dtype=np.complex128)
                for _ in range(config.m)]
    return FactorState(config=config, X=x0, Z=z0, a1=a1,
                       a_blocks=a_blocks, b_blocks=b_blocks)


def _check_kernels(config: ModelConfig, kernels: KernelDictionary) -> None:
    if kernels.m != config.m:
        raise ValueError(f"dictionary has {kernels.m} kernels, config expects {config.m}")
    if kernels.n_l != config.n_l:
        raise ValueError(f"Gram size {kernels.n_l} does not match n_l = {config.n_l}")


def _check_shapes(state: FactorState, kernels: KernelDictionary) -> None:
    cfg = state.config
    _check_kernels(cfg, kernels)
    cd = cfg.chain_dims
    if state.a1.shape != (cfg.dims.n_k, cfg.m * cd[1]):
        raise ValueError(f"first factor has shape {state.a1.shape}, "
                         f"expected {(cfg.dims.n_k, cfg.m * cd[1])}")
    for i, stage in enumerate(state.a_blocks):
        want = (cd[i + 1], cd[i + 2])
        for m, blk in enumerate(stage):
            if blk.shape != want:
                raise ValueError(f"stage {i + 2} block {m} has shape {blk.shape}, "
                                 f"expected {want}")
    for m, blk in enumerate(state.b_blocks):
        if blk.shape != (cfg.n_l, cfg.dims.n_fr):
            raise ValueError(f"coefficient block {m} has shape {blk.shape}, "
                             f"expected {(cfg.n_l, cfg.dims.n_fr)}")
