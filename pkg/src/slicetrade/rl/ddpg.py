"""Actor-critic agent pieces shared by the MADDPG and DDPG learners."""
from __future__ import annotations

import numpy as np

from .mlp import Adam, Mlp, soft_update


class DivergenceError(FloatingPointError):
    """A loss or gradient went non-finite during training."""


class Agent:
    """Deterministic actor, scalar critic, and their target copies.

    The actor ends in tanh, so actions live in (-1, 1). The critic has a
    linear output head so it can represent discounted returns of any scale.
    """

    def __init__(self, obs_dim, act_dim, critic_in_dim, hidden=(128, 128),
                 lr_actor=1e-3, lr_critic=1e-3, gamma=0.9, tau=1e-3, rng=None):
        rng = np.random.default_rng() if rng is None else rng
        self.obs_dim, self.act_dim, self.critic_in_dim = obs_dim, act_dim, critic_in_dim
        self.actor = Mlp([obs_dim, *hidden, act_dim], out_act="tanh", rng=rng)
        self.critic = Mlp([critic_in_dim, *hidden, 1], out_act="identity", rng=rng)
        self.target_actor = self.actor.clone()
        self.target_critic = self.critic.clone()
        self.actor_opt = Adam(self.actor.params, lr=lr_actor)
        self.critic_opt = Adam(self.critic.params, lr=lr_critic)
        self.gamma, self.tau = gamma, tau

    def act(self, obs):
        return self.actor.forward(obs, cache=False)

    def soft_update(self) -> None:
        soft_update(self.target_actor, self.actor, self.tau)
        soft_update(self.target_critic, self.critic, self.tau)

    def networks(self) -> dict:
        return {"actor": self.actor, "critic": self.critic,
                "target_actor": self.target_actor, "target_critic": self.target_critic}


def critic_target(reward, next_inputs, target_critic, gamma, own_grid=None, own_cols=None):
    """Bootstrapped TD target.

    With ``own_grid`` unset this is ``r + gamma * Q'(s', a')`` where ``next_inputs``
    already carries the target actors' next actions. With ``own_grid`` set, the
    agent's own next-action columns ``own_cols`` are swept over the grid and the
    maximum is used (the equilibrium-seeking target of the leaders).
    """
    reward = np.asarray(reward, dtype=float).reshape(-1, 1)
    x = np.asarray(next_inputs, dtype=float)
    if own_grid is None:
        q = np.asarray(target_critic(x)).reshape(-1, 1)
    else:
        grid = np.asarray(own_grid, dtype=float).reshape(len(own_grid), -1)
        B, G = x.shape[0], grid.shape[0]
        tiled = np.repeat(x[None, :, :], G, axis=0)
        tiled[:, :, own_cols] = grid[:, None, :]
        q = np.asarray(target_critic(tiled.reshape(G * B, -1))).reshape(G, B).max(axis=0)
        q = q.reshape(-1, 1)
    return reward + gamma * q


def critic_update(agent: Agent, inputs, y) -> float:
    """One Adam step on the mean squared TD error; returns the pre-step loss."""
    q = agent.critic.forward(inputs)
    diff = q - np.asarray(y, dtype=float).reshape(-1, 1)
    loss = float(np.mean(diff**2))
    if not np.isfinite(loss):
        raise DivergenceError(f"critic loss is {loss}")
    grads, _ = agent.critic.backward(2.0 * diff / diff.shape[0])
    agent.critic_opt.step(grads)
    return loss


def policy_gradient(agent: Agent, states, critic_inputs, own_cols):
    """Deterministic policy gradient of mean Q w.r.t. the actor parameters.

    ``critic_inputs`` holds the batch's critic inputs; the columns ``own_cols``
    are replaced by the actor's current actions before differentiating.
    Returns ``(grads of -mean Q, mean Q)``.
    """
    a = agent.actor.forward(states)
    x = np.array(critic_inputs, dtype=float, copy=True)
    x[:, own_cols] = a
    q = agent.critic.forward(x)
    B = x.shape[0]
    _, gin = agent.critic.backward(np.full((B, 1), 1.0 / B))
    dq_da = gin[:, own_cols]
    grads, _ = agent.actor.backward(-dq_da)
    return grads, float(q.mean())


def actor_update(agent: Agent, states, critic_inputs, own_cols) -> float:
    grads, q = policy_gradient(agent, states, critic_inputs, own_cols)
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise DivergenceError("non-finite actor gradient")
    agent.actor_opt.step(grads)
    return q


def explore(action, scale, rng):
    action = np.asarray(action, dtype=float)
    if scale <= 0:
        return action.copy()
    return np.clip(action + rng.normal(0.0, scale, size=action.shape), -1.0, 1.0)


def noise_scale(iteration, total, start=0.3, end=0.01, decay_frac=0.6):
    """Linear decay from ``start`` to ``end`` over the first ``decay_frac`` of training."""
    horizon = max(decay_frac * total, 1.0)
    frac = min(iteration / horizon, 1.0)
    return start + (end - start) * frac
