"""Sparse Pauli back-propagation with weight truncation and certified errors."""

__version__ = "0.1.0"

from .paulis import (
    PauliPhase,
    PauliString,
    PauliSum,
    pauli_commutes,
    pauli_multiply,
    pauli_weight,
    read_observable,
    sum_l2_mass,
    sum_truncate_coeff,
    sum_truncate_weight,
    sum_weight_histogram,
)
from .circuits import (
    Circuit,
    EnsembleSpec,
    FixedAngles,
    Gate,
    HaarSU4PerEdge,
    IndependentUniform,
    Layer,
    Layout,
    RotationPattern,
    RotationSet,
    SharedSingleAngle,
    Topology,
    build_brickwork_1d,
    build_staircase_2d,
    build_staircase_sweep_2d,
    ensemble_rng,
    layout_from_topology,
    load_topology_edges,
    sample_circuit,
    sample_haar_su4,
    sample_haar_unitary,
)
from .propagation import (
    BudgetExceededError,
    LayerStats,
    PTMatrix,
    ProductState,
    PropagationResult,
    TruncationPolicy,
    apply_gate_adjoint,
    back_propagate,
    estimate_expectation,
    gate_ptm,
    plus_state,
    product_state_trace,
    zero_state,
)
from .oracle import (
    ORACLE_MAX_QUBITS,
    StateVector,
    ptm_reference,
    statevector_expectation,
)
from .error_analysis import (
    MSEEstimate,
    PathSample,
    SecondMomentTransfer,
    UnsupportedEnsembleError,
    build_transfer,
    chernoff_samples,
    empirical_mse,
    mc_mse_estimate,
    mc_mse_profile,
    mse_bound,
    pauli_count,
    trivial_estimator_stats,
    weight1_variance_brickwork,
)
