# Package marker for sampler
from .rollouts import (
    AgentPaths,
    Rollout,
    RolloutBatch,
    assemble_joint_batch,
    dump_batch,
    sample_agent_paths,
    sample_joint_paths,
)
from .seeding import derive_seed, make_rng

__all__ = [
    "AgentPaths",
    "Rollout",
    "RolloutBatch",
    "assemble_joint_batch",
    "derive_seed",
    "dump_batch",
    "make_rng",
    "sample_agent_paths",
    "sample_joint_paths",
]
