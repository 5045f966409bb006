"""Recognition/decision regret decomposition for finite partially observable environments."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetError,
    DimensionMismatchError,
    EnumerationBudgetError,
    InputError,
    RegretscopeError,
    SolverError,
    TokenBudgetError,
    ValidationError,
)
from .mdp import (  # noqa: E402
    DecisionPolicy,
    FiniteEnv,
    RecognitionPolicy,
    Trajectory,
    ValuationSpec,
    induced_action_kernel,
    load_decision,
    load_env,
    load_recognition,
    save_env,
    simulate,
)
from .solver import (  # noqa: E402
    GenRegretReport,
    RegretReport,
    best_deterministic_decision,
    chain_value,
    generalization_decompose_exact,
    generalization_error,
    optimal_value,
    regret_decompose,
)
from .worked import (  # noqa: E402
    WorkedExampleBundle,
    appendix_recognitions,
    build_worked_envs,
    delta_optimal_decision,
    noisy_recognition,
    reproduce_worked_tables,
)
