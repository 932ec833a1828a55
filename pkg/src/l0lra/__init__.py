"""l0 low-rank matrix approximation: sublinear rank-1 algorithms, boolean
rank-1 solvers, rank-k column selection, exact oracles and generators."""
from .errors import (CapExceededError, EnumerationLimitError, MatrixFormatError,
                     PreconditionError)
from .matcore import (AccessStats, AliasTable, SparseMatrix, from_dense, from_triplets,
                      l0_distance_exact, outer_product, read_matrix_market, residual_exact,
                      write_matrix_market)
from .estimate import (EstimatorConfig, residual_race, residual_sample_estimate,
                       stopping_rule_estimate, stopping_threshold)
from .l0regress import (RegressionInstance, l0_regress_approx, l0_regress_approx_many,
                        l0_regress_exact, l0_regress_exact_many)
from .rank1 import (RankOneSolution, WeightClassPartition, detect_exact_rank1,
                    fit_column_sampled, solve_rank1, solve_rank1_baseline,
                    solve_rank1_boolean_2eps)
from .boolrank1 import (BooleanRunState, BooleanSolution, boolean_cost,
                        boolean_exhaustive_oracle, estimate_beta, solve_boolean_combined,
                        solve_boolean_exact_fpt, solve_boolean_smallopt, technical_profile)
from .rankk import (CertifyState, RankKSolution, certify_column_selection,
                    rankk_bracket_oracle, residual_rankk_exact, solve_rankk_basic,
                    solve_rankk_bicriteria)
from .instances import (PlantedInstance, gen_gaussian_identity, gen_identity_plus_ones,
                        gen_planted_boolean, gen_planted_rank1_real, gen_planted_rankk_real,
                        gen_sample_lb_hard, load_instance, save_instance)

__version__ = "0.1.0"
