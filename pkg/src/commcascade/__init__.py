"""Threshold cascades on two-community configuration-model graphs.

Simulation, mean-field fixed points, the four-dimensional flow, and the
contagion threshold, cross-validated against each other.
"""

__version__ = "0.1.0"

from .dist import (DegreeDistribution, DegreeSequences, RegularityReport,
                   build_distribution, regularity_report,
                   sample_degree_sequences, size_biased)
from .errors import ConfigError, InvariantViolation
from .genmodel import (CustomSeeding, DegreeTargetedSeeding, GlobalSeeding,
                       LinearThreshold, ModelSpec, MultiGraph,
                       PerCommunitySeeding, TableThreshold, alpha_of,
                       realize_full_graph)
from .cascade import (Event, EventKind, SimResult, SimState,
                      complete_matching, initialize_simulation, run, step,
                      threshold_closure)
from .meanfield import (CascadeRecursion, FixedPointResult,
                        inactive_fractions, recursion_jacobian,
                        recursion_update, solve_fixed_point,
                        termination_check)
from .odeflow import (OdeConfig, OdeTrajectory, Observables, StopReason,
                      integrate_physical, integrate_trajectory,
                      poisson_reduction, reconstruct_observables,
                      single_community_equivalent, symmetric_reduction)
from .contagion import (ContagionReport, SmallSeedTable, is_contagious,
                        perron_root, small_seed_limit,
                        spontaneous_adopter_mass, unseeded_jacobian)
