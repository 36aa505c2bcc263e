"""Shape parameter selection for RBF interpolation by condition-number
control: a band-targeting optimizer, classical adaptive baselines, a neural
predictor with a hard fallback guarantee, and an RBF-FD benchmark suite."""

from .baselines import (
    EpsGrid,
    LoocvResult,
    franke_shape,
    hardy_shape,
    loocv_error_vector_direct,
    modified_franke_shape,
    rippa_error_vector,
    rippa_shape,
)
from .conditioning import (
    CondBand,
    OptimizeResult,
    OptimizerConfig,
    cond_derivative,
    condition_loss,
    frobenius_cond,
    logcond,
    optimize_shape,
)
from .core import (
    Interpolant,
    KernelSpec,
    PointCloud,
    distance_matrix,
    eval_interpolant,
    fit_interpolant,
    interpolation_matrix,
    kernel_deps,
    kernel_eval,
    kernel_laplacian,
    l2_error,
)
from .dataset import DatasetRecord, GenerationConfig, generate_dataset, load_dataset, sample_cloud
from .errors import (
    DegenerateCloudError,
    GuaranteeViolationError,
    IllConditionedSolveError,
    InvalidModelError,
    ModelFormatError,
    NoFeasibleCandidateError,
    RbfShapeError,
    SingularMatrixError,
    UnsupportedModelVersionError,
)
from .fallback import FallbackConfig, FallbackOutcome, fallback_report, predict_shape
from .neural import (
    MlpModel,
    TrainConfig,
    backward,
    features,
    forward,
    load_model,
    make_model,
    save_model,
    sort_cloud,
    train,
)
from .rbffd import (
    NodeSets,
    StencilSet,
    assemble_global,
    bdf2_heat,
    build_stencils,
    local_weights,
    solve_poisson,
)

__version__ = "0.1.0"
