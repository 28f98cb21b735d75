"""safedpc: barrier-certified differentiable predictive control.

Train a neural receding-horizon policy offline against a discrete model with
barrier penalties, certify a sampled-data control barrier function from
computed Lipschitz constants, and run continuous-time closed loops in which an
event-triggered QP overrides the learned policy only near the safe-set
boundary.
"""

from .barrier import (BarrierConstants, BarrierFunction, CertReport,
                      CorridorBarrier, EstimationError, GridSpec,
                      certify_sdzcbf1, certify_sdzcbf2, check_condition_i,
                      check_condition_ii, compute_min_annulus_width,
                      estimate_constants, eval_h, eval_phi, in_annulus)
from .dpc import (FeatureVector, LossWeights, PolicyNetwork, RolloutBatch,
                  TrainingConfig, TrainingDivergedError, barrier_residual,
                  constraint_penalty, gradient, init_policy, load_weights,
                  mpc_loss, policy_forward, rollout, rollout_batch,
                  save_training_curve, save_weights, total_loss, train)
from .model import (DiscreteModel, DisturbanceSpec, InputSet,
                    OutOfDomainError, ReferenceTrajectory, SystemDynamics,
                    UnsupportedModelError, constant_reference, discretize,
                    eval_reference, eval_vector_field, linear_system,
                    sample_disturbance, sinusoid_reference)
from .safety_filter import (BackupSingularityError, FilterConfig,
                            QPInfeasibleError, QPResult, analytic_backup,
                            backup_norm_bound, safety_filter, solve_barrier_qp)
from .scenario import (DEFAULT_CONFIG, ConfigError, Scenario, build_scenario,
                       load_config, validate_config)
from .sim import (CONTROLLER_MODES, IntegrationError, SimConfig, SimMetrics,
                  SimulationError, TrajectoryLog, compute_metrics,
                  integrate_step, run_closed_loop, run_closed_loop_batch,
                  write_metrics, write_trajectory_csv)

__version__ = "0.1.0"
