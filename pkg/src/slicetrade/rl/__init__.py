from .ddpg import (Agent, DivergenceError, actor_update, critic_target, critic_update,
                   explore, noise_scale, policy_gradient)
from .mlp import Adam, Mlp, soft_update
from .replay import ReplayBuffer

__all__ = [
    "Adam", "Agent", "DivergenceError", "Mlp", "ReplayBuffer", "actor_update",
    "critic_target", "critic_update", "explore", "noise_scale", "policy_gradient",
    "soft_update",
]
