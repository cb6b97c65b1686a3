"""
pairecho: Hahn-echo electron spin dephasing from nuclear spin-pair flip-flops.

A pair-product coherence kernel driven by hyperfine differences and nuclear
dipolar flip-flop couplings, Monte-Carlo solvent baths, per-pair contribution
analysis, and an exact small-system quantum-dynamics oracle.
"""

from .model import (
    GAMMA_E,
    HBAR,
    ISOTOPE_GAMMAS,
    MU0_OVER_4PI,
    CapacityError,
    ElectronCenter,
    GeometryError,
    HyperfineSource,
    InputError,
    InsufficientDecayError,
    NuclearSpin,
    PairEchoError,
    ParseError,
    PipelineError,
    SpinSystem,
    UnknownIsotopeError,
    lookup_gamma,
)
from .dephasing import (
    CoherenceCurve,
    ContributionSet,
    PairClass,
    PairContribution,
    RankedPair,
    coherence_curve,
    first_maximum_time,
    modulation_depth,
    pair_frequency,
    rank_pairs,
    w_of_t,
)
from .couplings import (
    PairCoupling,
    PairCouplingSet,
    build_pair_couplings,
    dipolar_b,
    point_dipole_azz,
    point_dipole_spin_system,
)
from .bath import (
    BathConfiguration,
    BathSpec,
    density_from_solvent,
    ensemble,
    sample_configuration,
)
from .oracle import (
    SmallSpinProblem,
    TCL2Comparison,
    compare_tcl2,
    hahn_echo_exact,
    tcl2_curve,
)
from .analysis import (
    DistanceProfile,
    EnsembleResult,
    T2Method,
    T2Result,
    density_sweep,
    distance_profile,
    ensemble_average,
    ensemble_coherence,
    extract_t2,
)

__version__ = "0.1.0"
