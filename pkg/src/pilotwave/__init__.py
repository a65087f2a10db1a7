"""Pilot-wave dynamics laboratory.

Simulates guided particle trajectories riding on split-step Schrodinger
evolution (double slit, Stern-Gerlach pair, particle in a box), verifies
quantum-equilibrium statistics, and mechanically checks the finite
dimensional no-go results: value-map coloring (spin-1 triads, Peres rays,
the two-qubit magic square) and perfect-correlation nonlocality on
maximally entangled states.
"""

__version__ = "0.1.0"

from .numerics import (  # noqa: F401
    Grid,
    Potential,
    WaveFunction,
    absorbing_mask,
    energy,
    evolve,
    gradient,
    make_wavefunction,
)
from .guidance import (  # noqa: F401
    ChainedSource,
    Ensemble,
    SplitStepSource,
    StationarySource,
    Trajectory,
    VelocityField,
    evolve_ensemble,
    integrate_trajectory,
    velocity_field,
)
from .equilibrium import (  # noqa: F401
    BornSampler,
    EquivarianceReport,
    equivariance_check,
    sample_born,
)
from .hilbert import (  # noqa: F401
    ContextHypergraph,
    FiniteState,
    HermitianOperator,
    ValueAssignment,
    check_value_map,
    ks_search,
    mermin_square_check,
    peres_33_rays,
    spin1_squares,
)
from .nonlocality import (  # noqa: F401
    CorrespondencePair,
    MaxEntangledState,
    MeasurementRecord,
    chsh_quantum,
    correspond,
    enumerate_local_strategies,
    sample_epr,
    schroedinger_theorem_demo,
)
