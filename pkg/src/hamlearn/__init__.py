"""Learn sparse Pauli Hamiltonians from short-time dynamics or Gibbs states."""

from .bounds import Scales, bias_bound, commutator_norm_bound, error_bound
from .chebyshev import DerivativeDataset, constrained_fit, derivative_at_zero, interp_coeffs
from .graph import Coloring, InteractionGraph, build_graph, greedy_color, square_graph
from .hamiltonians import load_spec, random_tfim, tfim
from .learner import LearnOptions, LearnReport, gibbs_infer, learn, naive_infer, partition_infer, spam_for_term
from .oracle import PreparedState, QuantumOracle
from .pauli import Hamiltonian, OperatorSum, PauliString, commutator, iterated_commutator
from .planner import LearnPlan, plan

__version__ = "0.1.0"
