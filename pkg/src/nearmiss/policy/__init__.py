from .checkpoint import (
    CKPT_VERSION,
    CheckpointError,
    load_arrays,
    module_arrays,
    optimizer_arrays,
    restore_module,
    restore_optimizer,
    save_arrays,
)
from .networks import Actor, TwinCritic
from .observation import N_NEIGHBORS, N_WAYPOINTS, OBS_DIM, POSITION_NORM, build_observation
from .replay import ReplayBuffer
from .sac import SacAgent, SacConfig, smooth_action

__all__ = [
    "CKPT_VERSION", "CheckpointError", "load_arrays", "module_arrays",
    "optimizer_arrays", "restore_module", "restore_optimizer", "save_arrays",
    "Actor", "TwinCritic",
    "N_NEIGHBORS", "N_WAYPOINTS", "OBS_DIM", "POSITION_NORM", "build_observation",
    "ReplayBuffer",
    "SacAgent", "SacConfig", "smooth_action",
]
