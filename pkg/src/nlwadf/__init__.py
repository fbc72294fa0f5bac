"""Weighted and non-local anisotropic diffusion filters for 2D/3D images."""

__version__ = "0.1.0"

from ._kernels import backend_name
from .esf import (
    GammaEstimate,
    GammaSchedule,
    directional_gradient_sum,
    estimate_gamma0,
    estimate_sigma_gs,
    lambda_max,
    should_stop,
    tukey,
)
from .filter import FilterParams, FilterRunReport, adf_step, run_filter, wadf_step
from .io import VolumeFormatError, read_volume, write_volume
from .metrics import MetricsReport, evaluate, iqi, mse, psnr, ssim
from .noise import NoiseSpec, add_gaussian, add_noise, add_rician
from .nonlocal_diffusion import (
    NonLocalConfig,
    NonLocalLinks,
    PatchShape,
    build_links,
    nlwadf_step,
    patch_offsets,
    patch_ssd,
    run_nlwadf,
)
from .phantom import make_phantom
from .volume import (
    Adjacency,
    Boundary,
    ConfigurationError,
    Volume,
    make_adjacency,
    max_intensity,
    median_filter,
    neighbors,
)
