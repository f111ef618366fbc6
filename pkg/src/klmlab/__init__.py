"""klmlab: dissipative preparation of bipartite KLM states in a two-atom
Rydberg system, simulated with dense Lindblad master equations."""

__version__ = "0.1.0"

from klmlab.errors import (
    DimensionError,
    DomainError,
    NonUniqueSteadyStateError,
    NumericalFailureError,
    ValidationError,
)
from klmlab.liouville import Liouvillian, TimeGrid, build_liouvillian, propagate, spectral_gap, steady_state
from klmlab.measures import fidelity, negativity, population, purity
from klmlab.model import (
    SystemParams,
    antiblockade_urr,
    build_effective_hamiltonian,
    build_effective_lindblads,
    build_full_hamiltonian,
    build_full_lindblads,
    complement_states,
    initial_mixed_state,
    klm_state,
)
