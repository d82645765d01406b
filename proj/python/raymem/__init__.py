"""Ray-aware scene memory for streaming 3D reconstruction."""

from ._core import (
    Classification,
    GlobalOptions,
    MemoryConfig,
    MemoryStore,
    ObservationKind,
    ScenePointer,
    UpdatePolicy,
    UpdateReport,
    accuracy,
    ate_rmse,
    cmd_eval,
    cmd_ingest,
    cmd_simulate,
    completeness,
    joint_distance,
    run_scenario_config,
    __version__,
)

__all__ = [
    "Classification",
    "GlobalOptions",
    "MemoryConfig",
    "MemoryStore",
    "ObservationKind",
    "ScenePointer",
    "UpdatePolicy",
    "UpdateReport",
    "accuracy",
    "ate_rmse",
    "cmd_eval",
    "cmd_ingest",
    "cmd_simulate",
    "completeness",
    "joint_distance",
    "run_scenario_config",
    "__version__",
]
