"""Equation discovery with linear multistep residuals, and the inverse
modified equations that such training actually recovers."""

__version__ = "0.1.0"

from .lmm import (SCHEME_NAMES, LmmScheme, SchemeError, ValidationReport, catalog, normalize,
                  order, scheme_from_dict, schemes_to_json, validate)
from .jets import Jet, SingularityError, VectorField, flow_jet, lie_derivatives
from .imde import (K_MAX, ImdeError, TruncatedImde, XiSequence, eval_truncated_imde,
                   leading_term, residual, xi_coefficients, xi_oracle_check, xi_series)
from .dynamics import (Dataset, DivergenceError, GlycolyticParams, TrajectoryWindow,
                       constant_field, damped_oscillator, generate_dataset, glycolytic,
                       linear_field, lorenz, read_trajectory_csv, rk4_flow, rk4_trajectory,
                       sample_box, window_trajectory, write_trajectory_csv)
from .model import (Mlp, UnsupportedOrderError, backward, derivative_norms, forward,
                    mlp_new)
from .train import (LossError, Metrics, RegularizerConfig, TrainConfig, convergence_orders,
                    error_metric, fit_normalization, learning_rate, lmm_loss, regularized_loss,
                    regularizer_penalty, test_loss, train)
