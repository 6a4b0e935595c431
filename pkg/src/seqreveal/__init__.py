"""Sequential revelation mechanisms for dynamic screening under limited commitment."""

from .allocation import (Allocation, Contract, SeparatingSequence, agent_pool_value, agent_separating_value,
                         all_pooling, payoff_report, principal_profit)
from .constraints import VerificationReport, check_icl, check_ich, check_ir, check_nr, verify
from .environment import AgentType, Environment, check_assumption1, first_best, load_config, parse_config, surplus
from .errors import (CohortLookupError, DomainError, StructuralError, ThresholdRangeError,
                     UndeliverableRentError, ValidityError)
from .feasibility import Classification, FeasibilityResult, classify, condition_curve, rhs_curve, threshold_theta
from .optimizer import DecisionVector, OptimizeResult, StructureReport, lifecycle_trace, optimize, structure_check
from .reneging import (PunishmentState, check_equilibrium_conditions, deviation_bounds, large_delta_boundary,
                       patience_threshold, punishment_payoff)
from .reward import RewardPlan, debt_length, debt_length_from_ratio, frontload, split_rent
from .stationary import (StationaryDesign, auxiliary_tradeoff, best_stationary, build_stationary, nr_waiting_check,
                         stationary_design, suggest)

__version__ = "0.1.0"
