"""Advisor-guided multi-agent Q-learning for general-sum stochastic games."""
from .game import (AdvisorSolution, ConfigurationError, EnvStep, JointQTable, StageGame,
                   UsageError, advisor_q, greedy_own_action, joint_index, joint_unindex)
from .envs import GridMazeEnv, MatrixGameEnv, SingleStateDemoEnv, make_env
from .advisors import (AdaptiveAdvisor, Advisor, MazeAdvisor, RandomAdvisor,
                       ScriptedSequenceAdvisor, make_advisor, maze_advisor,
                       scripted_adaptive_advisor)
from .tabular import (LearnerConfig, Schedule, TrainResult, ae_update, dm_update,
                      normalize_epsilon0, select_action_ae, select_action_dm, train_ae, train_dm)
from .oracle import OracleConfig, advisor_value_q, mse, nash_q_identical_interest

__version__ = "0.1.0"
