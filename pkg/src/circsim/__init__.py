"""circsim: a multi-method quantum circuit simulator.

Three interchangeable backends (dense state vector, tensor contraction,
Pauli-string expansion) behind :func:`simulate`, plus a noise layer that
turns channel-bearing circuits into regular circuits on doubled registers.
"""

from .circuit import (
    Circuit,
    SuperCircuit,
    circuit_matrix,
    compress,
    inverse,
    isclose,
    lightcone_pop,
    moments,
    simplify,
    to_matrix_gate,
)
from .clifford import ExpansionResult, PauliString, pauli_transfer, reconstruct_density, simulate_clifford
from .errors import *  # noqa: F401,F403
from .gates import (
    Control,
    FunctionalGate,
    Gate,
    KrausSuperGate,
    MatrixGate,
    MatrixSuperGate,
    Measure,
    Projection,
    SchmidtGate,
    StochasticGate,
    Symbol,
    TupleGate,
    bind,
    get_available_gates,
    is_clifford,
    make_gate,
    schmidt_decompose,
    schmidt_merge,
)
from .noise import (
    AmplitudeDampingChannel,
    DephasingChannel,
    GlobalDepolarizingChannel,
    GlobalPauliChannel,
    LocalDepolarizingChannel,
    LocalPauliChannel,
    add_depolarizing_noise,
    sample_trajectories,
    simulate_density_matrix,
    validate_cptp,
)
from .simulation import expectation, simulate
from .statevector import StateVector, simulate_statevector
from .tensornet import plan_contraction, simulate_tn

__version__ = "0.1.0"
