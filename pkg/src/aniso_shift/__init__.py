"""Computational laboratory for Gibbs states and anisotropic analysis of shifts.

Modules
-------
shift_core   symbols, cylinders, step fields, the skew product
potentials   locally constant potentials, cohomology, ergodic maxima
rpf          unilateral transfer-operator eigendata, masses, samplers
grid_haar    good grids, unbalanced Haar atoms, Besov vectors, grid metric
aniso        the anisotropic tensor space and its measure constructions
bilateral    the bilateral transfer operator and spectral experiments
cli          batch front-end writing CSV/JSON reports and figures
"""

from .shift_core import (
    Alphabet,
    BiPoint,
    CompositionForm,
    Cylinder,
    Direction,
    PeriodicTail,
    ProductField,
    Side,
    StepField,
    cylinder_children,
    skew_apply,
    step_compose_branch,
)
from .potentials import (
    BilateralPotential,
    CoboundaryData,
    Potential,
    birkhoff_branch_sum,
    coboundary_residual,
    max_ergodic_average,
    normalize_pressure,
    reduce_to_one_sided,
)
from .rpf import RPFData, GibbsCertificate, sample_point, solve, verify_gibbs
from .grid_haar import (
    AtomKey,
    BesovVector,
    ExponentConfig,
    GoodGrid,
    SpaceTag,
    atom_field,
    besov_norm,
    build_grid,
    decompose,
    dirac_vector,
    duality_pair,
    certify_potential_holder,
    grid_metric,
    haar_splits,
    holder_seminorm,
    reconstruct,
)
from .aniso import (
    AnisoVector,
    HolderMap,
    MultiplierField,
    Observable,
    aniso_decompose,
    aniso_reconstruct,
    certify_holder_map,
    certify_multiplier,
    estimate_K,
    evaluate,
    graph_measure,
    graph_riemann_sum,
    marginal_plus,
    multiply,
    product_measure_embed,
    tensor,
    unit_mass_vector,
)
from .bilateral import (
    BranchOp,
    SpectralReport,
    TransferConfig,
    apply,
    branch_backward,
    branch_forward,
    correlation,
    correlation_direct,
    decay_rate,
    essential_radius_bound,
    fixed_point,
    gibbs_projection,
    make_transfer_config,
    norm_limited_probe,
    srb_experiment,
    step_operator,
)

__version__ = "0.1.0"
