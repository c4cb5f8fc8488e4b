"""State distribution-aware experience replay for Q-learning."""
from .clustering import (
    ClusterIndex,
    Featurizer,
    KMeansClusterer,
    KMeansModel,
    SimHashClusterer,
    SimHashParams,
    kmeans_assign,
    kmeans_fit,
    make_simhash,
    simhash_code,
)
from .envs import ChainMDP, EnvSpec, GridWorld, MountainCar, StepResult, value_iteration
from .errors import (
    AlignmentError,
    ConfigError,
    IndexCorruptionError,
    InvalidSlotError,
    NotReadyError,
    NumericFaultError,
    RejectedInputError,
    ReplayError,
)
from .qlearn import (
    EpisodeStats,
    LinearQ,
    TabularQ,
    TrainConfig,
    TrainState,
    act_epsilon_greedy,
    apply_update,
    sync_target,
    td_target,
    train,
)
from .replay import ReplayBuffer, Transition
from .sampling import SamplerConfig, Strategy, audit_distribution, probability, probability_of, sample_batch

__version__ = "0.1.0"
