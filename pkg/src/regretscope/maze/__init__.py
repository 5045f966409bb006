"""Key-door maze suite: environments, pre-filters, tabular learner and experiments."""

from .env import (
    Action,
    Color,
    DoorRow,
    MazeConfig,
    MazeState,
    all_configs,
    bfs_trajectory,
    maze_reset,
    maze_step,
    optimal_maze_value,
    render,
    shortest_solution,
    test_configs,
    train_configs,
)
from .experiments import (
    Aggregate,
    coarsening_sweep,
    empirical_generalization_decompose,
    open_loop_bound,
    perturbation_sweep,
)
from .filters import WALL_COLUMN_REGION, PreFilter, apply_filter, apply_mask, coarsen
from .learner import LearnerConfig, Recognition, evaluate, mixture_policy, train_tabular
from .similarity import SimilarityMatrix, similarity_matrix
from .tokens import TokenTable, fingerprint
