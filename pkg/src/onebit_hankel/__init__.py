"""One-bit dithered Hankel matrix completion for sparse-array radar direction finding."""

from .array_model import (
    ArrayGeometry,
    Snapshot,
    TargetScene,
    apply_mask,
    steering_vector,
    synthesize_snapshot,
    virtual_array,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    DetectionError,
    DivergenceError,
    DomainError,
    StageError,
)
from .experiment import ExperimentConfig, RunReport, emit_outputs, run_experiment, run_monte_carlo
from .hankel import ObservationSet, build_hankel, dehankel, hankel_dims, verify_vandermonde_rank
from .quantization import (
    DitherMatrix,
    OneBitObservation,
    generate_dither,
    one_bit_quantize,
    uniform_quantize,
    verify_onebit_equivalence,
)
from .spectrum import AngleSpectrum, PeakReport, angle_spectrum, find_peaks
from .svt import SamplingOperator, SvtResult, SvtState, complete_hankel_pipeline, shrink, svt_complete

__version__ = "0.1.0"
