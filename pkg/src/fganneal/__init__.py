"""Annealed free energies and growth rates of random sparse factor graph ensembles.

Library layout:
  factors     alphabets, dense factor tables, canonical constructors, text I/O
  ensembles   regular / irregular / Poisson specs, fields, design rate
  bp          message updates and fixed-point solvers
  newton      concave dual solver for the fixed-variable-type inner problem
  free_energy exponent evaluators, grid sweeps, closed forms, constraints
  stability   linear stability of the uniform point
  popdyn      replica-symmetric estimates by population dynamics
  counting    exact finite-size oracles over socket matchings and types
  cli         batch front door (CSV/JSON reports plus rendered figures)
"""

__version__ = "0.1.0"

from .bp import (MessagePair, PoissonState, IrregularState, SolveOptions,
                 SolveReport, solve_fixed_type, solve_irregular, solve_poisson,
                 solve_regular, update_f_to_v, update_v_to_f_field,
                 update_v_to_f_fixed_type, update_v_to_f_regular)
from .counting import (exact_annealed_finite, exhaustive_E_Z, expected_type_count,
                       finite_expected_z)
from .ensembles import (FieldSpec, IrregularSpec, PoissonSpec, RandomFieldSpec,
                        RegularSpec, design_rate)
from .errors import (BudgetExceeded, DegenerateMessage, FgAnnealError, Infeasible,
                     NoStationaryPoint, SolverAbort)
from .factors import (Alphabet, FactorTable, all_ones_factor, binary_csp_factor,
                      build_factor_table, default_alphabet, equality_factor,
                      load_factor_table, not_equal_factor, parity_check_factor,
                      replicate_factor, save_factor_table)
from .free_energy import (GridPoint, LdpcParams, MuConstraint, NuConstraint,
                          TypeAssignment, annealed_field, annealed_irregular,
                          annealed_poisson, annealed_random_field, annealed_regular,
                          annealed_regular_at, bethe_type_objective, default_grid,
                          fixed_type_value, growth_rate_curve, growth_rate_fixed_type,
                          ldpc_growth_rate_closed_form, maximize_with_linear_constraints,
                          moment_exponent)
from .newton import NewtonOptions, dual_objective, maximize_mu_given_nu
from .popdyn import (PdOptions, check_annealed_rs_equality, de_step, rs_fixed_points,
                     rs_free_energy)
from .stability import (StabilityReport, binary_csp_stability_fraction,
                        binary_csp_stability_value, linearized_operator,
                        paramagnetic_stability)

__all__ = [name for name in dir() if not name.startswith("_")]
