"""Limiting spectra of block-modified random matrices and the entanglement criteria they drive."""

from .spectra import (
    Atomic,
    CumulantSeries,
    Density,
    Dilate,
    FreeConv,
    MarchenkoPastur,
    MomentSeries,
    OrderOverflowError,
    Semicircle,
    Shift,
    SupportInterval,
    atoms,
    cumulants,
    cumulants_from_moments,
    density_grid,
    exact_support,
    from_json,
    moments,
    moments_from_cumulants,
    noncrossing_partitions,
    quantile,
    to_json,
)
from .freeconv import (
    NonInvertibleBranchError,
    atom_persistence,
    cauchy_transform,
    density,
    free_power,
    support,
    support_bound,
    support_edges,
)
from .criteria import (
    ChoiSpec,
    CriterionReport,
    UnitarityViolation,
    check_unitarity,
    choi_matrix,
    ent_bound,
    ent_witness,
    evaluate_all,
    modified_measure,
    ppt_bound,
    ppt_verdict,
    schmidt_feasibility,
    sep_bounds,
    sep_verdicts,
    sk_norm_limit,
)

__version__ = "0.1.0"
