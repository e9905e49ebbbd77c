"""Hierarchical clustered multiclass linear discriminant analysis."""

from hclda.cv import (
    CvResult,
    FastCvWorkspace,
    apparent_error,
    cv_error,
    exact_loo_allocations,
    fast_loo_allocations,
)
from hclda.errors import (
    DegenerateEigenvalue,
    HcldaError,
    InputError,
    InsufficientData,
    InvalidDataset,
    InvalidDimension,
    InvalidInput,
    InvalidPartition,
    LeverageOverflow,
    NumericalError,
    ParseError,
    SingularMatrix,
)
from hclda.hierarchy import (
    MergeTrace,
    MetaclassPartition,
    TwoStageModel,
    hierarchical_fit,
    relabel,
    select_partition,
    two_stage_cv,
    two_stage_fit,
    two_stage_predict,
)
from hclda.lda import (
    ClassStatistics,
    DiscriminantModel,
    LabeledDataset,
    class_statistics,
    classify,
    fit_lda,
    inv_sqrt_sym,
    lda,
    transform,
)
from hclda.io import load_csv, load_model, save_csv, save_model
from hclda.regression import build_responses, hat_bundle, ridge_solve
from hclda.simulate import generate_model1, generate_model2

__version__ = "0.1.0"
