"""Finite-scale toolkit for orbit decompositions, marker sets, decaying Rokhlin
towers, crossed-product matrix models, and certified completely positive
approximations of crossed products by a single bijection."""

from .approx import (
    ApproxParams,
    CPFactorization,
    DimensionLedger,
    assemble_and_verify,
    derive_params,
    ideal_approx,
    make_ledger,
    quasicentral_unit,
    quotient_approx,
    run_approximation,
    verify_ideal_corner,
    verify_quotient_corner,
)
from .cstar import (
    CrossedElement,
    NormResult,
    OrbitFiberRep,
    holonomy,
    norm,
    orbit_isomorphism,
    orbit_rep,
    orbit_rep_with_phases,
    periodic_embedding,
    primitive_spectrum,
    regular_window_norm,
)
from .dynsys import (
    FiniteDynamicalSystem,
    InvariantSplit,
    OrbitDecomposition,
    invariant_split,
    load_system,
    make_cycle_system,
    make_rotation_system,
    orbit_decomposition,
    quotient_report,
)
from .markers import (
    GroupWindow,
    MarkerCertificate,
    cover_extension_step,
    disjointness_margin,
    free_locus,
    greedy_markers,
    is_disjoint_family,
    local_marker,
    marker_certificate,
)
from .towers import (
    CyclicTower,
    DecayingTower,
    TowerFamily,
    build_partition,
    build_tower_family,
    cyclic_to_decaying,
    decaying_to_cyclic,
    folner_average,
    tower_supports,
    verify_tower,
)

__version__ = "0.1.0"
