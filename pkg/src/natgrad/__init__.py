"""Natural and vanilla policy gradients on small control problems.

The pieces, bottom-up:

* :mod:`natgrad.distributions` -- Gaussian and softmax policy families
* :mod:`natgrad.information_geometry` -- Fisher estimates, KL-Hessian check, damping
* :mod:`natgrad.linear_solver` -- Cholesky and conjugate-gradient solves of ``F x = g``
* :mod:`natgrad.envs` -- bandit and gridworld, rollouts, REINFORCE
* :mod:`natgrad.natural_gradient` -- the KL-budgeted natural update
* :mod:`natgrad.experiment` -- configs, training loop, comparisons, diagnostics
"""

from .distributions import (
    ParamVector,
    PolicyFamily,
    categorical_family,
    fisher_analytic,
    gaussian_family,
    kl_closed_form,
    log_prob,
    params,
    reparameterize,
    sample,
    score,
)
from .information_geometry import (
    FisherEstimate,
    damp,
    fisher_from_samples,
    kl_hessian_fd,
    monte_carlo_kl,
)
from .linear_solver import SolveReport, conjugate_gradient, solve_spd
from .envs import (
    GaussianBandit,
    Gridworld,
    Trajectory,
    estimate_objective,
    reinforce_gradient,
    rollout,
    rollout_batch,
)
from .natural_gradient import (
    UpdateReport,
    dynamic_step_size,
    euclidean_vs_kl_diagnostic,
    natural_direction,
    npg_update,
    vanilla_update,
)
from .experiment import (
    ExperimentConfig,
    compare_methods,
    load_config,
    run_diagnostics,
    run_experiment,
)

__version__ = "0.1.0"
