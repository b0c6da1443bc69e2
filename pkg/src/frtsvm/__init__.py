"""Fuzzy robust twin support vector machines with a coordinate-descent dual solver."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    DataError,
    Dataset,
    MinMaxScaler,
    add_gaussian_noise,
    fit_scaler,
    gen_ripley_mixture,
    gen_sine_band,
    load_csv,
    make_folds,
    save_csv,
    train_test_split,
)
from .evaluation import GridSpec, cross_validate, fit_with_grid, grid_search, timing_compare  # noqa: E402
from .kernels import KernelSpec  # noqa: E402
from .membership import MembershipParams, membership_kernel, membership_linear  # noqa: E402
from .model import (  # noqa: E402
    ConvergenceError,
    KernelModel,
    LinearModel,
    ModelError,
    TrainConfig,
    load_model,
    save_model,
    train,
    train_tsvm_baseline,
)
from .solver import (  # noqa: E402
    DualProblem,
    SolverConfig,
    brute_force_oracle,
    solve,
    solve_plain,
    solve_shrinking,
)

__all__ = [name for name in dir() if not name.startswith("_")]
