"""Training loops: CoST-MADDPG and the ST-MADDPG, SA-DDPG and Random baselines.

All four share the market environment and history format. Leaders (sellers)
observe the previous slot's purchases and post prices; followers (coalition
slots, ranked by summed reputation) observe the posted prices and request
quantities. Actions live in [-1, 1] and are decoded onto the config grids.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .env import MarketEnv, env_reset, env_step, price_grid, qty_grid
from .rl import Agent, DivergenceError, ReplayBuffer, actor_update, critic_target, critic_update
from .rl import explore, noise_scale
from .stackelberg import OracleInfeasible, _check_budget, solve_se_bruteforce

COST_MADDPG, ST_MADDPG, SA_DDPG, RANDOM = "cost_maddpg", "st_maddpg", "sa_ddpg", "random"


# -- action coding ----------------------------------------------------------

def decode(action, grid) -> np.ndarray:
    """Map actions in [-1, 1] to grid indices (nearest point)."""
    a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
    return np.rint((a + 1.0) / 2.0 * (len(grid) - 1)).astype(int)


def encode(idx, grid) -> np.ndarray:
    n = len(grid)
    return np.asarray(idx, dtype=float) / max(n - 1, 1) * 2.0 - 1.0


def _norm(x, top):
    return np.asarray(x, dtype=float) / top


# -- history ----------------------------------------------------------------

@dataclass
class TrainingHistory:
    algorithm: str
    seed: int
    config_digest: str
    num_sellers: int
    num_buyers: int
    loss_names: list
    prices: list = field(default_factory=list)
    quantities: list = field(default_factory=list)
    seller_rewards: list = field(default_factory=list)
    follower_rewards: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    partitions: list = field(default_factory=list)
    clipped: list = field(default_factory=list)
    se_gap: list = field(default_factory=list)
    aborted: str = ""
    wall_time_s: float = 0.0

    def __len__(self):
        return len(self.prices)

    def log(self, prices, quantities, seller_r, follower_r, losses, partition, clipped, gap):
        self.prices.append(np.asarray(prices, dtype=float).copy())
        self.quantities.append(np.asarray(quantities, dtype=float).copy())
        self.seller_rewards.append(np.asarray(seller_r, dtype=float).copy())
        self.follower_rewards.append(np.asarray(follower_r, dtype=float).copy())
        self.losses.append(np.asarray(losses, dtype=float).copy())
        self.partitions.append(partition)
        self.clipped.append(int(clipped))
        self.se_gap.append(float(gap))

    def array(self, name) -> np.ndarray:
        return np.array(getattr(self, name), dtype=float)

    @property
    def system_utility(self) -> np.ndarray:
        if not self.prices:
            return np.zeros(0)
        return self.array("seller_rewards").sum(axis=1) + self.array("follower_rewards").sum(axis=1)

    @property
    def seller_utility(self) -> np.ndarray:
        return self.array("seller_rewards").sum(axis=1) if self.prices else np.zeros(0)

    @property
    def buyer_utility(self) -> np.ndarray:
        return self.array("follower_rewards").sum(axis=1) if self.prices else np.zeros(0)

    def header(self) -> list:
        M, N = self.num_sellers, self.num_buyers
        return (["iteration", "partition"]
                + [f"price_{m}" for m in range(M)] + [f"qty_{n}" for n in range(N)]
                + [f"seller_reward_{m}" for m in range(M)]
                + [f"follower_reward_{n}" for n in range(N)]
                + ["system_utility"] + [f"loss_{x}" for x in self.loss_names]
                + ["clipped", "se_gap"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for t in range(len(self)):
            sr, fr = self.seller_rewards[t], self.follower_rewards[t]
            row = [t, self.partitions[t]]
            row += [repr(float(x)) for x in self.prices[t]]
            row += [repr(float(x)) for x in self.quantities[t]]
            row += [repr(float(x)) for x in sr] + [repr(float(x)) for x in fr]
            row.append(repr(float(sr.sum() + fr.sum())))
            row += [repr(float(x)) for x in self.losses[t]]
            row += [self.clipped[t], repr(self.se_gap[t])]
            w.writerow(row)
        return buf.getvalue()

    def metadata(self) -> str:
        return (f"algorithm {self.algorithm}\nseed {self.seed}\nconfig_hash {self.config_digest}\n"
                f"iterations {len(self)}\naborted {self.aborted or 'no'}\n"
                f"wall_time_s {self.wall_time_s:.3f}\n")

    def write(self, path) -> None:
        """CSV at ``path`` plus a ``.meta`` sidecar with run metadata."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        path.with_suffix(".meta").write_text(self.metadata())


# -- helpers ----------------------------------------------------------------

def derived_reward_scale(cfg: ExperimentConfig, env: MarketEnv) -> float:
    if cfg.reward_scale > 0:
        return cfg.reward_scale
    # one unit of reward ~ the full shortfall traded at the widest margin
    volume = sum(t.profile.shortfall for t in env.buyers)
    return 1.0 / (env.unit_bw * max(float(volume), 1.0) * (cfg.price_max - cfg.mno_price or 1.0))


class _Oracle:
    """Brute-force SE per distinct game, when the enumeration budget allows."""

    def __init__(self, cfg: ExperimentConfig, enabled: bool):
        self.enabled, self.budget, self.cache = enabled, cfg.oracle_budget, {}

    def gap(self, env: MarketEnv, price_idx, qty_idx) -> float:
        if not self.enabled:
            return math.nan
        key = env.game.digest()
        if key not in self.cache:
            try:
                _check_budget(env.game, self.budget)
                sol = solve_se_bruteforce(env.game, self.budget)
                pg, qg = env.game.prices, env.game.quantities
                self.cache[key] = (np.array([int(np.argmin(abs(pg - p))) for p in sol.prices]),
                                   np.array([int(np.argmin(abs(qg - q))) for q in sol.quantities]))
            except OracleInfeasible:
                self.cache[key] = None
        sol = self.cache[key]
        if sol is None:
            return math.nan
        C = env.num_active
        d = np.concatenate([np.abs(np.asarray(price_idx) - sol[0]),
                            np.abs(np.asarray(qty_idx)[:C] - sol[1])])
        return float(d.max())


def _hidden(cfg):
    return (cfg.hidden_units,) * cfg.hidden_layers


def _check_state(env, hist):
    # the seller's observed state must be last slot's logged purchases
    if hist.quantities and not np.array_equal(env.leader_state(), hist.quantities[-1]):
        raise AssertionError("leader state differs from the previous slot's quantities")


def _finish(hist, t0):
    hist.wall_time_s = time.perf_counter() - t0
    return hist


# -- MADDPG (CoST and ST) ---------------------------------------------------

def _maddpg(cfg: ExperimentConfig, seed: int, use_coalitions: bool, algorithm: str,
            se_gap: bool) -> TrainingHistory:
    t0 = time.perf_counter()
    env = env_reset(cfg, seed, use_coalitions=use_coalitions)
    rng = np.random.default_rng([seed, 1])
    M, N = env.num_sellers, env.num_buyers
    pg, qg = price_grid(cfg), qty_grid(cfg)
    scale = derived_reward_scale(cfg, env)
    hid = _hidden(cfg)
    kw = dict(lr_actor=cfg.lr_actor, lr_critic=cfg.lr_critic, gamma=cfg.gamma, tau=cfg.tau, rng=rng)
    # leader critic sees (state, all leader actions); follower critic sees (prices, all follower actions)
    leaders = [Agent(N, 1, N + M, hid, **kw) for _ in range(M)]
    followers = [Agent(M, 1, M + N, hid, **kw) for _ in range(N)]
    lbuf = ReplayBuffer(cfg.replay_capacity, N, M, M)
    fbuf = ReplayBuffer(cfg.replay_capacity, M, N, N)
    names = [f"seller{m}" for m in range(M)] + [f"follower{n}" for n in range(N)]
    hist = TrainingHistory(algorithm, seed, cfg.digest(), M, N, names)
    oracle = _Oracle(cfg, se_gap)
    grid16 = np.linspace(-1.0, 1.0, cfg.stackelberg_grid_points)
    pending = None

    def lstate():
        return _norm(env.leader_state(), cfg.qty_max)

    def fstate(prices):
        return _norm(prices, cfg.price_max)

    try:
        for t in range(cfg.iterations):
            env.form_coalitions()
            _check_state(env, hist)
            C = env.num_active
            sigma = noise_scale(t, cfg.iterations, cfg.noise_start, cfg.noise_end, cfg.noise_decay_frac)
            s = lstate()
            la = np.array([explore(ag.act(s), sigma, rng)[0] for ag in leaders])
            p_idx = decode(la, pg)
            prices = pg[p_idx]
            o = fstate(prices)
            if pending is not None:
                fbuf.push(pending[0], pending[1], pending[2], o)
            fa = np.full(N, -1.0)
            for n in range(C):
                fa[n] = explore(followers[n].act(o), sigma, rng)[0]
            q_idx = decode(fa, qg)
            req = np.where(np.arange(N) < C, qg[q_idx], 0.0)
            res = env_step(env, prices, req)
            lbuf.push(s, encode(p_idx, pg), scale * res.leader_rewards, lstate())
            f_act = np.where(np.arange(N) < C, encode(q_idx, qg), -1.0)
            pending = (o, f_act, scale * res.follower_rewards)

            losses = np.full(M + N, math.nan)
            lb = lbuf.sample(cfg.batch_size, rng)
            if lb is not None:
                S, A, R, S2 = lb
                A2 = np.column_stack([ag.target_actor(S2)[:, 0] for ag in leaders])
                X, X2 = np.hstack([S, A]), np.hstack([S2, A2])
                for m, ag in enumerate(leaders):
                    col = N + m
                    if cfg.leader_target == "stackelberg":
                        y = critic_target(R[:, m], X2, ag.target_critic, cfg.gamma, grid16, [col])
                    else:
                        y = critic_target(R[:, m], X2, ag.target_critic, cfg.gamma)
                    losses[m] = critic_update(ag, X, y)
                    actor_update(ag, S, X, [col])
            fb = fbuf.sample(cfg.batch_size, rng)
            if fb is not None:
                O, A, R, O2 = fb
                A2 = np.column_stack([ag.target_actor(O2)[:, 0] for ag in followers])
                X, X2 = np.hstack([O, A]), np.hstack([O2, A2])
                for n, ag in enumerate(followers):
                    col = M + n
                    if cfg.follower_target == "stackelberg":
                        y = critic_target(R[:, n], X2, ag.target_critic, cfg.gamma, grid16, [col])
                    else:
                        y = critic_target(R[:, n], X2, ag.target_critic, cfg.gamma)
                    losses[M + n] = critic_update(ag, X, y)
                    actor_update(ag, O, X, [col])
            if lb is not None or fb is not None:
                for ag in leaders + followers:
                    ag.soft_update()
            gap = oracle.gap(env, p_idx, q_idx)
            hist.log(prices, res.filled, res.leader_rewards, res.follower_rewards, losses,
                     env.partition.label(), res.clipped, gap)
    except (DivergenceError, FloatingPointError) as exc:
        hist.aborted = f"diverged at iteration {len(hist)}: {exc}"
    hist.agents = {"leaders": leaders, "followers": followers}
    return _finish(hist, t0)


def train_cost_maddpg(cfg: ExperimentConfig, seed: int, se_gap: bool = True) -> TrainingHistory:
    """Coalition formation every slot, then Stackelberg MADDPG over the winning coalitions."""
    return _maddpg(cfg, seed, True, COST_MADDPG, se_gap)


# -- baselines --------------------------------------------------------------

def _sa_ddpg(cfg: ExperimentConfig, seed: int, se_gap: bool) -> TrainingHistory:
    # one agent emits every seller's price and every buyer's quantity; it is
    # rewarded with seller 0's utility only
    t0 = time.perf_counter()
    env = env_reset(cfg, seed, use_coalitions=False)
    rng = np.random.default_rng([seed, 1])
    M, N = env.num_sellers, env.num_buyers
    pg, qg = price_grid(cfg), qty_grid(cfg)
    scale = derived_reward_scale(cfg, env)
    obs_dim, act_dim = N + M, M + N
    agent = Agent(obs_dim, act_dim, obs_dim + act_dim, _hidden(cfg), lr_actor=cfg.lr_actor,
                  lr_critic=cfg.lr_critic, gamma=cfg.gamma, tau=cfg.tau, rng=rng)
    buf = ReplayBuffer(cfg.replay_capacity, obs_dim, act_dim, 1)
    hist = TrainingHistory(SA_DDPG, seed, cfg.digest(), M, N, ["agent"])
    oracle = _Oracle(cfg, se_gap)
    own = list(range(obs_dim, obs_dim + act_dim))

    def obs():
        return np.concatenate([_norm(env.leader_state(), cfg.qty_max),
                               _norm(env.prices, cfg.price_max)])

    try:
        for t in range(cfg.iterations):
            env.form_coalitions()
            _check_state(env, hist)
            sigma = noise_scale(t, cfg.iterations, cfg.noise_start, cfg.noise_end, cfg.noise_decay_frac)
            s = obs()
            a = explore(agent.act(s), sigma, rng)
            p_idx, q_idx = decode(a[:M], pg), decode(a[M:], qg)
            res = env_step(env, pg[p_idx], qg[q_idx])
            buf.push(s, np.concatenate([encode(p_idx, pg), encode(q_idx, qg)]),
                     [scale * res.leader_rewards[0]], obs())
            loss = math.nan
            b = buf.sample(cfg.batch_size, rng)
            if b is not None:
                S, A, R, S2 = b
                X2 = np.hstack([S2, agent.target_actor(S2)])
                y = critic_target(R[:, 0], X2, agent.target_critic, cfg.gamma)
                X = np.hstack([S, A])
                loss = critic_update(agent, X, y)
                actor_update(agent, S, X, own)
                agent.soft_update()
            gap = oracle.gap(env, p_idx, q_idx)
            hist.log(pg[p_idx], res.filled, res.leader_rewards, res.follower_rewards, [loss],
                     env.partition.label(), res.clipped, gap)
    except (DivergenceError, FloatingPointError) as exc:
        hist.aborted = f"diverged at iteration {len(hist)}: {exc}"
    hist.agents = {"agent": agent}
    return _finish(hist, t0)


def _random(cfg: ExperimentConfig, seed: int, se_gap: bool) -> TrainingHistory:
    t0 = time.perf_counter()
    env = env_reset(cfg, seed, use_coalitions=False)
    rng = np.random.default_rng([seed, 1])
    M, N = env.num_sellers, env.num_buyers
    pg, qg = price_grid(cfg), qty_grid(cfg)
    hist = TrainingHistory(RANDOM, seed, cfg.digest(), M, N, [])
    oracle = _Oracle(cfg, se_gap)
    for t in range(cfg.iterations):
        env.form_coalitions()
        _check_state(env, hist)
        p_idx = rng.integers(0, len(pg), size=M)
        q_idx = rng.integers(0, len(qg), size=N)
        res = env_step(env, pg[p_idx], qg[q_idx])
        gap = oracle.gap(env, p_idx, q_idx)
        hist.log(pg[p_idx], res.filled, res.leader_rewards, res.follower_rewards, [],
                 env.partition.label(), res.clipped, gap)
    return _finish(hist, t0)


def train_baseline(kind: str, cfg: ExperimentConfig, seed: int, se_gap: bool = True) -> TrainingHistory:
    if kind == ST_MADDPG:
        return _maddpg(cfg, seed, False, ST_MADDPG, se_gap)
    if kind == SA_DDPG:
        return _sa_ddpg(cfg, seed, se_gap)
    if kind == RANDOM:
        return _random(cfg, seed, se_gap)
    raise ValueError(f"unknown baseline {kind!r}")


def train(algorithm: str, cfg: ExperimentConfig, seed: int, se_gap: bool = True) -> TrainingHistory:
    if algorithm == COST_MADDPG:
        return train_cost_maddpg(cfg, seed, se_gap)
    return train_baseline(algorithm, cfg, seed, se_gap)
