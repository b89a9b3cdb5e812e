"""Spherical-harmonics shape registration, distortion features and
classification for genus-0 surface cohorts."""

from .config import PipelineConfig, config_from_dict, load_config
from .distortion import (
    DistortionFeatures,
    beltrami_magnitude,
    compute_distortion,
    curvatures,
    face_beltrami,
    mixed_vertex_areas,
    shape_index,
    volume_distortion,
)
from .errors import (
    DegenerateData,
    DegenerateTriangle,
    IllConditioned,
    IndexOutOfRange,
    InvalidParameter,
    LengthMismatch,
    MissingArtifact,
    ParamFailure,
    ParseError,
    RealityViolation,
    SchemaMismatch,
    SimplificationError,
    SpharmShapeError,
    StageError,
    TooFewSubjects,
    TopologyError,
    ZeroVolume,
)
from .evaluation import (
    EvaluationReport,
    evaluate,
    export_significance_map,
    ground_truth_template_mask,
    method_columns,
    sweep_pcut,
)
from .features import (
    FeatureMatrix,
    FeatureSchema,
    SelectionResult,
    TtestResult,
    assemble_feature_vector,
    bagged_ttest,
    restrict,
    select_features,
    two_sample_ttest,
)
from .harmonics import (
    SpharmCoefficients,
    basis_matrix,
    eval_basis,
    eval_harmonic,
    fit_coefficients,
    lm_index,
    n_coefficients,
    reconstruct,
)
from .mesh import (
    MeshQualityReport,
    TriangleMesh,
    improve_mesh,
    laplacian_smooth,
    load_mesh,
    refine,
    save_off,
    save_ply_colored,
    signed_volume,
    simplify,
    validate_genus0,
    validate_topology,
)
from .pipeline import (
    build_cohort_template,
    cohort_feature_matrix,
    normalized_cohort_coefficients,
    subject_coefficients,
    write_manifest,
)
from .sphere import SphericalParam, check_bijectivity, parametrize_sphere
from .svm import (
    Scaler,
    SvmModel,
    decision_function,
    predict,
    rbf_kernel,
    smo_solve,
    standardize,
    train_svm,
)
from .synth import (
    Cohort,
    CohortSpec,
    GroundTruth,
    clean_base_mesh,
    generate_cohort,
    generate_subject,
    load_cohort,
    save_cohort,
)
from .template import (
    AlignmentResult,
    FoeTransform,
    MeanTemplate,
    RegisteredSurface,
    align_to_reference,
    build_mean_surface,
    build_template_sphere,
    fibonacci_directions,
    foe_normalize,
    register_subject,
)

__version__ = "0.1.0"
