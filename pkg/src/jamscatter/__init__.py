"""Simulator and learning agents for jamming-resistant backscatter links."""

from .env import (
    EnvConfig,
    EnvState,
    LinkEnv,
    Metrics,
    MetricsAccumulator,
    Observation,
    StepOutcome,
    default_rate_table,
    metrics_update,
    num_states,
    observe,
    reset,
    state_index,
    step,
)
from .jammer import JammerConfig, JammerStrategy, optimal_strategy, sample_level
from .agents import (
    AGENT_KINDS,
    QTable,
    ReplayBuffer,
    TrainConfig,
    TrainResult,
    train_agent,
)
from .nets import DuelingQNet, PlainQNet, make_net
from .harness import (
    ExperimentSpec,
    MetricsRow,
    emit_csv,
    load_spec,
    run_experiment,
    spec_from_dict,
    sweep_defaults,
)

__version__ = "0.1.0"
