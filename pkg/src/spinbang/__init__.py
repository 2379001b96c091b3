"""spinbang: bang-bang switching-time control of spin-chain quantum wires."""

__version__ = "0.1.0"

from .chain import (
    MODEL_HEISENBERG,
    MODEL_XY,
    MODEL_XYZ,
    Actuator,
    AddCouplingDelta,
    ChainSpec,
    DEFAULT_ACTUATOR,
    DiagonalShift,
    SubspaceHamiltonian,
    SwitchOffCoupling,
    apply_actuator,
    build_subspace_hamiltonian,
    chain_from_dict,
    chain_to_dict,
    load_chain,
    perturb_spec,
    sample_disordered_chain,
    save_chain,
    uniform_chain,
)
from .closedloop import (
    BenchmarkReport,
    FidelityOracle,
    MeasuredObjective,
    compare_algorithms,
    discrete_gradient,
    genetic_optimize,
    measure_fidelity,
    nelder_mead,
    quasi_newton_closed_loop,
    QuasiNewtonPolicy,
)
from .newton import (
    NewtonPolicy,
    OptimizationProblem,
    OptimizationResult,
    SequenceEvaluator,
    gradient,
    hessian,
    multistart,
    newton_optimize,
    quantize_times,
    random_initial_durations,
)
from .propagate import (
    OFF_FIRST,
    ON_FIRST,
    SpectralCache,
    SwitchingSequence,
    evolve_sequence,
    population_trace,
    spectral_decompose,
    transfer_fidelity,
    uncontrolled_fidelity,
    uncontrolled_peak,
)
