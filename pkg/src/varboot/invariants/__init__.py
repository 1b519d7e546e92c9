"""Natural pure-distortion invariants in dimension 4."""

from .catalogue import (
    BasisMember,
    DegreeProfile,
    FirstOrderCatalogue,
    FirstOrderTerm,
    InvariantBasis,
    RankCertificate,
    SectorCounts,
    admissible_profiles,
    density_factor,
    distortion_space,
    enumerate_algebraic,
    enumerate_first_order,
    equivariance_check,
    generic_rank,
    independence_rank,
    named_basis,
    pattern_form,
    proportionality_check,
    q_only_sector,
    structural_zeros,
    t_only_sector,
)
from .patterns import ContractionPattern, from_indices, instantiate, pattern_classes

__all__ = [
    "BasisMember", "ContractionPattern", "DegreeProfile", "FirstOrderCatalogue", "FirstOrderTerm",
    "InvariantBasis", "RankCertificate", "SectorCounts", "admissible_profiles", "density_factor",
    "distortion_space", "enumerate_algebraic", "enumerate_first_order", "equivariance_check",
    "from_indices", "generic_rank", "independence_rank", "instantiate", "named_basis",
    "pattern_classes", "pattern_form", "proportionality_check", "q_only_sector",
    "structural_zeros", "t_only_sector",
]
