"""Dynamic image series reconstruction from under-sampled (k,t)-space data."""

__version__ = "0.1.0"

from .dataset import PhantomSpec, TensorFormatError, generate_phantom, load_tensor, save_tensor
from .estimator import (MultilinearKernelReconstructor, ZeroFilledReconstructor,
                        validate_kspace_mask)
from .kernels import (GaussianKernel, KernelDictionary, LandmarkSet, PolynomialKernel,
                      build_dictionary, default_specs, kernel_value, select_landmarks)
from .metrics import MetricReport, evaluate, hfen, nrmse, sharpness_m1, sharpness_m2, ssim
from .model import (FactorState, Hyperparams, ModelConfig, default_hyperparams, forward,
                    init_state, objective, parameter_count, zero_filled)
from .sampling import (InfeasibleAccelerationError, acceleration_rate, apply_sampling,
                       cartesian_mask, radial_mask)
from .solver import (DivergenceError, IterationReport, RestartResult, gamma_step,
                     multi_restart, sca_solve, soft_threshold, write_trace_csv)
from .tensors import (DataDims, dft2_frames, extract_navigator, matrix_to_tensor,
                      temporal_dft, tensor_to_matrix, vectorize_frame)

__all__ = [
    "__version__",
    "DataDims", "dft2_frames", "temporal_dft", "tensor_to_matrix", "matrix_to_tensor",
    "vectorize_frame", "extract_navigator",
    "PhantomSpec", "generate_phantom", "save_tensor", "load_tensor", "TensorFormatError",
    "cartesian_mask", "radial_mask", "apply_sampling", "acceleration_rate",
    "InfeasibleAccelerationError",
    "LandmarkSet", "GaussianKernel", "PolynomialKernel", "KernelDictionary",
    "select_landmarks", "kernel_value", "build_dictionary", "default_specs",
    "ModelConfig", "Hyperparams", "FactorState", "forward", "objective",
    "parameter_count", "init_state", "zero_filled", "default_hyperparams",
    "gamma_step", "soft_threshold", "sca_solve", "multi_restart", "write_trace_csv",
    "IterationReport", "RestartResult", "DivergenceError",
    "MetricReport", "nrmse", "ssim", "hfen", "sharpness_m1", "sharpness_m2", "evaluate",
    "MultilinearKernelReconstructor", "ZeroFilledReconstructor", "validate_kspace_mask",
]
