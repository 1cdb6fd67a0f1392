"""Periodic voxel FEM homogenization with warm-started iterative solvers.

The package computes effective elastic tensors of periodic 3D
microstructures (TPMS lattices, Gaussian-random-field foams) by voxel
finite elements, and benchmarks how much an externally supplied initial
displacement field (coarse-grid prolongation or a learned surrogate)
shortens the iterative solve.
"""

from .geometry import (
    GrfSpec,
    LevelSetSpec,
    Network,
    TpmsFamily,
    VoxelModel,
    evaluate_level_set,
    generate_grf,
    grf_field,
    solve_level_for_fraction,
    volume_fraction,
    voxel_centers,
    voxelize,
)
from .material import IsotropicMaterial, isotropic_tensor, voxel_tensor
from .fem import (
    MACRO_STRAINS,
    PeriodicMesh,
    PeriodicSystem,
    affine_field,
    apply_operator,
    corner_affine,
    element_stiffness,
    fields_to_grid,
    grid_to_fields,
    load_vectors,
    local_strains,
)
from .solvers import (
    DivergenceError,
    Method,
    Preconditioner,
    SolverConfig,
    SolveReport,
    decide_finetune,
    empirical_convergence_rate,
    relative_residual,
    solve,
)
from .homogenization import (
    ErrorMatrix,
    HomogenizedTensor,
    ScalingFactor,
    apply_scaling,
    calibrate_scaling,
    homogenized_tensor,
    model_hash,
    relative_error_matrix,
)
from .estimators import Homogenizer, ScalingCalibrator
from .container import (
    ContainerError,
    load_model,
    read_container,
    save_model,
    write_container,
)
from .pipeline import (
    active_nodes,
    bench_warmstart,
    calibrate_from_manifest,
    coarse_model,
    gen_dataset,
    generate_tpms_model,
    import_initial_guess,
    prolong_fields,
    run_homogenize,
    thread_count,
)

__version__ = "0.1.0"

__all__ = [
    "GrfSpec",
    "LevelSetSpec",
    "Network",
    "TpmsFamily",
    "VoxelModel",
    "evaluate_level_set",
    "generate_grf",
    "grf_field",
    "solve_level_for_fraction",
    "volume_fraction",
    "voxel_centers",
    "voxelize",
    "IsotropicMaterial",
    "isotropic_tensor",
    "voxel_tensor",
    "MACRO_STRAINS",
    "PeriodicMesh",
    "PeriodicSystem",
    "affine_field",
    "apply_operator",
    "corner_affine",
    "element_stiffness",
    "fields_to_grid",
    "grid_to_fields",
    "load_vectors",
    "local_strains",
    "DivergenceError",
    "Method",
    "Preconditioner",
    "SolverConfig",
    "SolveReport",
    "decide_finetune",
    "empirical_convergence_rate",
    "relative_residual",
    "solve",
    "ErrorMatrix",
    "HomogenizedTensor",
    "ScalingFactor",
    "apply_scaling",
    "calibrate_scaling",
    "homogenized_tensor",
    "model_hash",
    "relative_error_matrix",
    "Homogenizer",
    "ScalingCalibrator",
    "ContainerError",
    "load_model",
    "read_container",
    "save_model",
    "write_container",
    "active_nodes",
    "bench_warmstart",
    "calibrate_from_manifest",
    "coarse_model",
    "gen_dataset",
    "generate_tpms_model",
    "import_initial_guess",
    "prolong_fields",
    "run_homogenize",
    "thread_count",
]
