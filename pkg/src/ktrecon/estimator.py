"""Estimator-style front end so the reconstruction composes with sklearn tooling.

Both estimators are transductive: ``fit(kspace, mask)`` reconstructs the
series it is given and stores the result as ``image_``; ``predict`` and
``transform`` return that reconstruction.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import metrics
from .kernels import build_dictionary, default_specs, select_landmarks
from .model import ModelConfig, default_hyperparams, zero_filled
from .sampling import apply_sampling
from .solver import sca_solve
from .tensors import as_tensor3, dims_of, extract_navigator, matrix_to_tensor, navigator_columns


def validate_kspace_mask(kspace, mask, upsilon: int | None = None):
    """Check a (k,t)-space series and its sampling mask for consistency.

    Returns the validated pair. When ``upsilon`` is given, every frame must
    have the full navigator band acquired.
    """
    kspace = as_tensor3(kspace)
    mask = np.asarray(mask)
    if mask.shape != kspace.shape:
        raise ValueError(f"mask shape {mask.shape} does not match data shape {kspace.shape}")
    bits = (mask != 0)
    frames_without_samples = np.flatnonzero(~bits.any(axis=(0, 1)))
    if frames_without_samples.size:
        raise ValueError(f"frames {frames_without_samples.tolist()} acquire no entries")
    if upsilon is not None:
        cols = navigator_columns(kspace.shape[1], upsilon)
        if not bits[:, cols.start:cols.stop, :].all():
            raise ValueError("navigator band is not fully acquired in every frame")
    return kspace, bits.astype(np.uint8)


class ZeroFilledReconstructor(BaseEstimator):
    """Baseline: inverse spatial DFT of the zero-filled k-space."""

    def fit(self, kspace, mask):
        kspace, mask = validate_kspace_mask(kspace, mask)
        self.image_ = zero_filled(kspace, mask)
        return self

    def predict(self, X=None):
        if not hasattr(self, "image_"):
            raise NotFittedError("call fit before predict")
        return self.image_

    def transform(self, X=None):
        return self.predict(X)


class MultilinearKernelReconstructor(BaseEstimator):
    """Landmark-kernel multilinear factorization reconstruction.

    Parameters mirror the model and solver knobs: ``n_kernels`` branches of
    depth ``depth`` with the given ``inner_dims``, ``n_landmarks``
    navigator columns, an ``upsilon``-wide navigator band, and the
    regularization/loop controls. ``lambda3=None`` scales the spectrum
    threshold to the data magnitude.
    """

    def __init__(self, n_kernels=1, depth=2, inner_dims=(6,), n_landmarks=16,
                 upsilon=6, lambda1=1e-3, lambda2=1.0, lambda3=None, lambda4=1e-3,
                 tau_x=1e-2, tau_z=1e-2, tau_a=1e-2, tau_b=1e-2, gamma0=1.0,
                 zeta=0.3, max_outer=300, tol_rel=1e-5, b_tol=1e-6, b_max_iter=300,
                 random_state=0):
        self.n_kernels = n_kernels
        self.depth = depth
        self.inner_dims = inner_dims
        self.n_landmarks = n_landmarks
        self.upsilon = upsilon
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.lambda3 = lambda3
        self.lambda4 = lambda4
        self.tau_x = tau_x
        self.tau_z = tau_z
        self.tau_a = tau_a
        self.tau_b = tau_b
        self.gamma0 = gamma0
        self.zeta = zeta
        self.max_outer = max_outer
        self.tol_rel = tol_rel
        self.b_tol = b_tol
        self.b_max_iter = b_max_iter
        self.random_state = random_state

    def _hyperparams(self, kspace):
        overrides = dict(lambda1=self.lambda1, lambda2=self.lambda2,
                         lambda4=self.lambda4, tau_x=self.tau_x, tau_z=self.tau_z,
                         tau_a=self.tau_a, tau_b=self.tau_b, gamma0=self.gamma0,
                         zeta=self.zeta, max_outer=self.max_outer,
                         tol_rel=self.tol_rel, b_tol=self.b_tol,
                         b_max_iter=self.b_max_iter)
        if self.lambda3 is not None:
            overrides["lambda3"] = self.lambda3
        return default_hyperparams(kspace, **overrides)

    def fit(self, kspace, mask):
        kspace, mask = validate_kspace_mask(kspace, mask, upsilon=self.upsilon)
        dims = dims_of(kspace)
        if self.n_landmarks > dims.n_fr:
            raise ValueError(f"n_landmarks {self.n_landmarks} exceeds frame count {dims.n_fr}")
        observed = apply_sampling(mask, kspace)
        navigators = extract_navigator(observed, self.upsilon)
        landmarks = select_landmarks(navigators, self.n_landmarks)
        dictionary = build_dictionary(landmarks, default_specs(landmarks, self.n_kernels))
        config = ModelConfig(dims=dims, n_l=self.n_landmarks, m=self.n_kernels,
                             q=self.depth, inner_dims=tuple(self.inner_dims))
        hp = self._hyperparams(observed)
        state, reports = sca_solve(config, dictionary, mask, observed, hp,
                                   seed=self.random_state)
        self.landmarks_ = landmarks
        self.dictionary_ = dictionary
        self.config_ = config
        self.state_ = state
        self.reports_ = reports
        self.objective_ = reports[-1].objective
        self.image_ = matrix_to_tensor(state.X, dims)
        return self

    def predict(self, X=None):
        if not hasattr(self, "image_"):
            raise NotFittedError("call fit before predict")
        return self.image_

    def transform(self, X=None):
        return self.predict(X)

    def score(self, X=None, y=None):
        """Negative reconstruction error against a reference series ``y``."""
        if y is None:
            raise ValueError("score requires the reference image series as y")
        return -metrics.nrmse(y, self.predict())
