"""Under-display camera toolkit: degradation simulation and restoration.

Light entering a camera mounted behind a display diffracts at the panel's
pixel openings, loses intensity, and picks up sensor noise. This package
simulates that forward process on 16-bit RGGB mosaics (blur kernels
computed from the display layout, per-channel intensity scaling,
signal-dependent noise) and restores degraded frames with a denoise /
inverse-scale / frequency-domain-deconvolution / demosaic chain, plus
calibration and evaluation tooling and a CLI (``udcsim``).
"""

__version__ = "0.1.0"

from .calibrate import (
    CalibrationReport,
    IntensityPairSeries,
    MtfCurve,
    average_frames,
    estimate_gamma,
    estimate_noise,
    measure_mtf,
    repeat_noise_calibration,
)
from .degrade import (
    DegradationModel,
    IntensityScale,
    NoiseParams,
    add_noise,
    apply_gamma,
    convolve_psf,
    synthesize,
)
from .errors import (
    ConfigError,
    CoverageError,
    DegenerateKernelError,
    DimensionError,
    DomainError,
    IllConditionedError,
    ImageIoError,
    ImageTypeError,
    UdcError,
)
from .metrics import EvalReport, evaluate, psnr, ssim
from .optics import (
    DisplayPattern,
    OpticalConfig,
    Psf,
    PsfSet,
    crop_aperture,
    delta_psf,
    delta_psf_set,
    downsample_factor,
    psf_anisotropy,
    psf_set,
    simulate_psf,
)
from .raw import (
    CHANNELS,
    BayerRaw,
    ChannelStack,
    RgbImage,
    load_image,
    load_raw,
    load_rgb,
    merge_bayer,
    save_image,
    split_bayer,
)
from .restore import (
    RestoreParams,
    demosaic_bilinear,
    denoise_channel,
    inverse_gamma,
    restore,
    wiener_deconvolve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
