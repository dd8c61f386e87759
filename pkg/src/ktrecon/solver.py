"""Successive convex approximation over the factorization block variables.

Each outer iteration solves four convex sub-tasks from the current
iterate (all of them, Jacobi style), then convex-combines every variable
with the diminishing weight ``gamma``. The image sub-task and the
spectrum sub-task have closed forms, the chain-factor sub-tasks are small
ridge systems, and the coefficient sub-task runs an operator-splitting
inner loop with one cached factorization shared across all columns.
"""

import csv
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .kernels import KernelDictionary
from .model import (FactorState, Hyperparams, ModelConfig, forward, init_state,
                    objective)
from .tensors import (dft2_frames, matrix_to_tensor, temporal_dft, tensor_to_matrix)


class DivergenceError(RuntimeError):
    """A sub-task produced non-finite values."""

    def __init__(self, subtask: str):
        super().__init__(f"non-finite values produced by sub-task {subtask!r}")
        self.subtask = subtask


@dataclass
class IterationReport:
    """Per-iteration trace of one outer step."""

    n: int
    gamma: float
    objective: float
    rel_change: float
    b_inner_iters: int
    b_primal_residual: float
    b_dual_residual: float
    consistency_residual: float
    affine_residual: float
    seconds: float
    b_warning: bool = False


TRACE_COLUMNS = ("n", "gamma", "objective", "rel_change", "b_inner_iters",
                 "b_primal_residual", "b_dual_residual", "consistency_residual",
                 "affine_residual")


def write_trace_csv(reports, path, include_seconds: bool = False) -> None:
    """Dump a list of reports as CSV.

    Wall time is opt-in: leaving it out keeps repeated runs byte-identical.
    """
    columns = TRACE_COLUMNS + (("seconds",) if include_seconds else ())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rep in reports:
            writer.writerow([repr(getattr(rep, c)) if isinstance(getattr(rep, c), float)
                             else getattr(rep, c) for c in columns])


def gamma_step(gamma: float, zeta: float) -> float:
    """One step of the diminishing combination weight: ``g * (1 - zeta * g)``."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    if not 0 < zeta < 1:
        raise ValueError(f"zeta must be in (0, 1), got {zeta}")
    return gamma * (1.0 - zeta * gamma)


def soft_threshold(values, threshold: float) -> np.ndarray:
    """Complex soft-thresholding ``z * max(0, 1 - t / |z|)`` entrywise."""
    arr = np.asarray(values, dtype=np.complex128)
    mag = np.abs(arr)
    safe = np.where(mag > 0, mag, 1.0)
    return arr * np.maximum(0.0, 1.0 - threshold / safe)


def update_X(state: FactorState, kernels: KernelDictionary, mask, kspace,
             hp: Hyperparams) -> np.ndarray:
    """Exact minimizer of the image sub-task.

    The unconstrained part is an isotropic quadratic, so the constrained
    minimizer is the Euclidean projection of its solution onto the
    data-consistency set: overwrite the sampled k-space entries.
    """
    dims = state.config.dims
    prediction = forward(state, kernels)
    target = (prediction
              + hp.lambda2 * temporal_dft(state.Z, "inverse")
              + hp.tau_x * state.X) / (1.0 + hp.lambda2 + hp.tau_x)
    k = dft2_frames(matrix_to_tensor(target, dims), "forward")
    sampled = np.asarray(mask) != 0
    k[sampled] = np.asarray(kspace)[sampled]
    return tensor_to_matrix(dft2_frames(k, "inverse"))


def update_Z(state: FactorState, hp: Hyperparams) -> np.ndarray:
    """Closed-form spectrum sub-task: soft-thresholded weighted average."""
    weight = hp.lambda2 + hp.tau_z
    if weight <= 0:
        raise ValueError("lambda2 + tau_z must be positive")
    pull = (hp.lambda2 * temporal_dft(state.X, "forward") + hp.tau_z * state.Z) / weight
    return soft_threshold(pull, hp.lambda3 / weight)


def _right_chain(state: FactorState, kernels: KernelDictionary, m: int,
                 from_stage: int) -> np.ndarray:
    """Product of stages ``from_stage .. Q`` of branch ``m`` applied to K_m B_m."""
    term = kernels.grams[m] @ state.b_blocks[m]
    for idx in reversed(range(from_stage - 2, state.config.q - 1)):
        term = state.a_blocks[idx][m] @ term
    return term


def _left_chain(state: FactorState, m: int, upto_stage: int) -> np.ndarray:
    """Product of the first factor through stage ``upto_stage`` of branch ``m``."""
    term = state.a1_slice(m)
    for idx in range(upto_stage - 1):
        term = term @ state.a_blocks[idx][m]
    return term


def update_A1(state: FactorState, kernels: KernelDictionary,
              hp: Hyperparams) -> np.ndarray:
    """Ridge solve for the stacked image-domain first factor."""
    cfg = state.config
    right = np.vstack([_right_chain(state, kernels, m, from_stage=2)
                       for m in range(cfg.m)])
    shift = hp.lambda4 + hp.tau_a
    gram = right @ right.conj().T + shift * np.eye(right.shape[0])
    rhs = state.X @ right.conj().T + hp.tau_a * state.a1
    return np.linalg.solve(gram, rhs.conj().T).conj().T


def update_Aq(state: FactorState, kernels: KernelDictionary, hp: Hyperparams,
              q: int) -> list[np.ndarray]:
    """Exact block-diagonal stage update via its small normal equations.

    The map from the stacked block entries to the prediction is linear;
    its Gram has one Kronecker-product block per branch pair, and the
    system size is the total block entry count (small by construction).
    """
    cfg = state.config
    if not 2 <= q <= cfg.q:
        raise ValueError(f"stage must be in [2, {cfg.q}], got {q}")
    cd = cfg.chain_dims
    rows, cols = cd[q - 1], cd[q]
    block_size = rows * cols
    left = [_left_chain(state, m, upto_stage=q - 1) for m in range(cfg.m)]
    right = [_right_chain(state, kernels, m, from_stage=q + 1) for m in range(cfg.m)]

    size = cfg.m * block_size
    gram = np.empty((size, size), dtype=np.complex128)
    rhs = np.empty(size, dtype=np.complex128)
    for mi in range(cfg.m):
        sl_i = slice(mi * block_size, (mi + 1) * block_size)
        for mj in range(cfg.m):
            sl_j = slice(mj * block_size, (mj + 1) * block_size)
            gram[sl_i, sl_j] = np.kron((right[mj] @ right[mi].conj().T).T,
                                       left[mi].conj().T @ left[mj])
        rhs[sl_i] = ((left[mi].conj().T @ state.X @ right[mi].conj().T).ravel(order="F")
                     + hp.tau_a * state.a_blocks[q - 2][mi].ravel(order="F"))
    shift = hp.lambda4 + hp.tau_a
    theta = np.linalg.solve(gram + shift * np.eye(size), rhs)
    return [theta[m * block_size:(m + 1) * block_size].reshape((rows, cols), order="F")
            for m in range(cfg.m)]


@dataclass
class BUpdateInfo:
    """Inner-loop diagnostics of the coefficient sub-task."""

    iterations: int
    primal_residual: float
    dual_residual: float
    warning: bool


def update_B(state: FactorState, kernels: KernelDictionary,
             hp: Hyperparams) -> tuple[list[np.ndarray], BUpdateInfo]:
    """Coefficient sub-task under the per-block sum-to-one constraints.

    Operator splitting per column, all columns batched: an equality
    constrained quadratic step (closed-form KKT solve reusing one cached
    factorization), complex soft-thresholding, and dual ascent. The
    returned blocks are re-projected so column sums are exact.
    """
    cfg = state.config
    n_l, n_fr, m = cfg.n_l, cfg.dims.n_fr, cfg.m
    design = np.hstack([_left_chain(state, mi, upto_stage=cfg.q) @ kernels.grams[mi]
                        for mi in range(m)])
    rho = hp.tau_b + 1.0
    size = m * n_l
    quad = design.conj().T @ design + (hp.tau_b + rho) * np.eye(size)
    if not np.all(np.isfinite(quad)):
        raise DivergenceError("coefficients")
    try:
        quad_cho = scipy.linalg.cho_factor(quad)
    except np.linalg.LinAlgError as exc:
        # finite but astronomically scaled chains can defeat the shift
        raise DivergenceError("coefficients") from exc
    constraint = np.zeros((m, size))
    for mi in range(m):
        constraint[mi, mi * n_l:(mi + 1) * n_l] = 1.0
    qinv_ct = scipy.linalg.cho_solve(quad_cho, constraint.conj().T)
    schur = constraint @ qinv_ct
    schur_cho = scipy.linalg.cho_factor(schur)

    anchor = np.vstack(state.b_blocks)
    pull = design.conj().T @ state.X + hp.tau_b * anchor
    ones = np.ones((m, n_fr))

    primal = dual = np.inf
    b = anchor.copy()
    w = anchor.copy()
    u = np.zeros_like(anchor)
    iterations = 0
    for iterations in range(1, hp.b_max_iter + 1):
        rhs = pull + rho * (w - u)
        unconstrained = scipy.linalg.cho_solve(quad_cho, rhs)
        multipliers = scipy.linalg.cho_solve(schur_cho, constraint @ unconstrained - ones)
        b = unconstrained - qinv_ct @ multipliers
        w_prev = w
        w = soft_threshold(b + u, hp.lambda1 / rho)
        u = u + b - w
        primal = float(np.linalg.norm(b - w, axis=0).max())
        dual = float(rho * np.linalg.norm(w - w_prev, axis=0).max())
        if primal <= hp.b_tol and dual <= hp.b_tol:
            break
    warning = (iterations >= hp.b_max_iter
               and max(primal, dual) > 10.0 * hp.b_tol)

    blocks = []
    for mi in range(m):
        blk = b[mi * n_l:(mi + 1) * n_l].copy()
        blk += (1.0 - blk.sum(axis=0)) / n_l
        blocks.append(blk)
    return blocks, BUpdateInfo(iterations, primal, dual, warning)


def _constraint_residuals(state: FactorState, mask, kspace) -> tuple[float, float]:
    sampled = np.asarray(mask) != 0
    k = dft2_frames(matrix_to_tensor(state.X, state.config.dims), "forward")
    consistency = float(np.max(np.abs(k[sampled] - np.asarray(kspace)[sampled]),
                               initial=0.0))
    affine = max(float(np.max(np.abs(blk.sum(axis=0) - 1.0)))
                 for blk in state.b_blocks)
    return consistency, affine


def _require_finite(name: str, *arrays) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise DivergenceError(name)


def sca_solve(config: ModelConfig, kernels: KernelDictionary, mask, kspace,
              hp: Hyperparams, seed: int = 0,
              callback=None) -> tuple[FactorState, list[IterationReport]]:
    """Run the outer loop from a seeded start.

    All four half-updates are computed from the iteration-``n`` state, then
    every variable is convex-combined with weight ``gamma``. Both endpoints
    of the combination satisfy the affine, block-structure, and
    data-consistency constraints, so every iterate does. Stops at
    ``max_outer`` iterations or once the relative objective change stays
    below ``tol_rel`` for five consecutive iterations.
    """
    state = init_state(config, kernels, mask, kspace, seed)
    gamma = hp.gamma0
    obj = objective(state, kernels, mask, kspace, hp, check=False)
    consistency, affine = _constraint_residuals(state, mask, kspace)
    reports = [IterationReport(n=0, gamma=gamma, objective=obj, rel_change=float("nan"),
                               b_inner_iters=0, b_primal_residual=0.0,
                               b_dual_residual=0.0, consistency_residual=consistency,
                               affine_residual=affine, seconds=0.0)]
    if callback is not None:
        callback(state, reports[-1])

    small_changes = 0
    for n in range(1, hp.max_outer + 1):
        started = time.perf_counter()
        x_half = update_X(state, kernels, mask, kspace, hp)
        _require_finite("image", x_half)
        z_half = update_Z(state, hp)
        _require_finite("spectrum", z_half)
        a1_half = update_A1(state, kernels, hp)
        _require_finite("first factor", a1_half)
        deep_halves = [update_Aq(state, kernels, hp, q) for q in range(2, config.q + 1)]
        for q, stage in enumerate(deep_halves, start=2):
            _require_finite(f"stage {q} factor", *stage)
        b_half, b_info = update_B(state, kernels, hp)
        _require_finite("coefficients", *b_half)

        half = FactorState(config=config, X=x_half, Z=z_half, a1=a1_half,
                           a_blocks=deep_halves, b_blocks=b_half)
        gamma = gamma_step(gamma, hp.zeta)
        state = state.combine(half, gamma)

        prev = obj
        obj = objective(state, kernels, mask, kspace, hp, check=False)
        if not np.isfinite(obj):
            raise DivergenceError("objective")
        rel = float(abs(obj - prev) / max(abs(prev), np.finfo(float).tiny))
        consistency, affine = _constraint_residuals(state, mask, kspace)
        reports.append(IterationReport(
            n=n, gamma=gamma, objective=obj, rel_change=rel,
            b_inner_iters=b_info.iterations,
            b_primal_residual=b_info.primal_residual,
            b_dual_residual=b_info.dual_residual,
            consistency_residual=consistency, affine_residual=affine,
            seconds=time.perf_counter() - started, b_warning=b_info.warning))
        if callback is not None:
            callback(state, reports[-1])

        small_changes = small_changes + 1 if rel < hp.tol_rel else 0
        if small_changes >= 5:
            break
    return state, reports


@dataclass
class RestartRun:
    """Outcome of one seeded solve."""

    seed: int
    state: FactorState
    reports: list[IterationReport]
    final_objective: float
    metrics: dict[str, float] | None = None


@dataclass
class RestartResult:
    """All seeded runs plus across-seed aggregates."""

    runs: list[RestartRun]
    best_seed: int
    mean_metrics: dict[str, float] | None = None


def multi_restart(config: ModelConfig, kernels: KernelDictionary, mask, kspace,
                  hp: Hyperparams, seeds, truth=None, workers: int = 1) -> RestartResult:
    """Run the solver once per seed and aggregate metric means.

    ``truth`` is an optional reference image series; when given, each run
    is scored and the across-seed metric means are reported. Per-run
    failures are re-raised with the offending seed named.
    """
    from . import metrics as metrics_mod

    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")

    def run_one(seed):
        try:
            state, reports = sca_solve(config, kernels, mask, kspace, hp, seed=seed)
        except Exception as exc:
            raise RuntimeError(f"restart with seed {seed} failed: {exc}") from exc
        scores = None
        if truth is not None:
            image = matrix_to_tensor(state.X, config.dims)
            scores = metrics_mod.evaluate(truth, image).as_dict()
        return RestartRun(seed=seed, state=state, reports=reports,
                          final_objective=reports[-1].objective, metrics=scores)

    if workers > 1 and len(seeds) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(run_one, seeds))
    else:
        runs = [run_one(seed) for seed in seeds]

    best = min(runs, key=lambda r: r.final_objective)
    mean_metrics = None
    if truth is not None:
        keys = runs[0].metrics.keys()
        mean_metrics = {k: float(np.mean([r.metrics[k] for r in runs])) for k in keys}
    return RestartResult(runs=runs, best_seed=best.seed, mean_metrics=mean_metrics)
