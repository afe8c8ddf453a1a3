"""Trading market as a Markov decision process.

Each timeslot:

1. buyers form coalitions (valued at the previously posted prices),
2. coalitions are ranked by summed reputation and matched to sellers,
3. sellers post prices having observed last slot's purchases,
4. coalitions choose purchase quantities having observed the prices,
5. orders are filled within each seller's sellable cap.

Seller reward uses the previous slot's quantities at the current price,
coalition reward uses the current quantities at the current price.
PRB leases are per slot: pools are restored at the start of every slot.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import coalition as coal
from .config import (TENANT_CLASSES, TENANT_R_MIN_KBPS, TENANT_TAU_MAX_MS, ConfigError,
                     ExperimentConfig)
from .market import Role, TenantProfile
from .netmodel import (RadioConfig, ServiceClass, TenantQos, required_prbs, snr_per_prb,
                       tenant_satisfaction)
from .stackelberg import (FollowerSpec, StackelbergGame, allocate, follower_best_response,
                          payoffs)


def price_grid(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(cfg.price_min, cfg.price_max, cfg.price_grid_points)


def qty_grid(cfg: ExperimentConfig) -> np.ndarray:
    g = np.round(np.linspace(cfg.qty_min, cfg.qty_max, cfg.qty_grid_points))
    return np.unique(g)


def radio_config(cfg: ExperimentConfig) -> RadioConfig:
    return RadioConfig(
        system_bandwidth_hz=cfg.system_bandwidth_hz,
        num_prbs=cfg.num_prbs,
        bs_power_dbm=cfg.bs_power_dbm,
        noise_density_dbm_hz=cfg.noise_density_dbm_hz,
        carrier_freq_mhz=cfg.carrier_freq_mhz,
        packet_size_bits=cfg.packet_size_bits,
        shadowing_sigma_db=cfg.shadowing_sigma_db,
    )


@dataclass
class Tenant:
    profile: TenantProfile
    snr: np.ndarray
    arrivals: np.ndarray
    satisfaction: float = 0.0


def _tenant_slot(role: Role, k: int) -> int:
    # buyers walk the tenant table from tenant 1 upward, sellers from tenant 5 downward
    return k % 5 if role == Role.BUYER else 4 - (k % 5)


def build_tenants(cfg: ExperimentConfig, rng: np.random.Generator):
    """Draw UE positions, reputations and PRB leases for every tenant."""
    radio = radio_config(cfg)
    half = cfg.area_side_m / 2.0
    roles = [Role.BUYER] * cfg.num_buyers + [Role.SELLER] * cfg.num_sellers
    counts = {Role.BUYER: 0, Role.SELLER: 0}
    tenants = []
    for tid, role in enumerate(roles):
        slot = _tenant_slot(role, counts[role])
        counts[role] += 1
        cls = ServiceClass(TENANT_CLASSES[slot])
        qos = TenantQos(TENANT_R_MIN_KBPS[slot] * 1e3, TENANT_TAU_MAX_MS[slot] * 1e-3, cfg.eta)
        xy = rng.uniform(-half, half, size=(cfg.ues_per_tenant, 2))
        dist = np.maximum(np.hypot(xy[:, 0], xy[:, 1]), cfg.min_distance_m)
        shadow = (rng.normal(0.0, cfg.shadowing_sigma_db, size=dist.size)
                  if cfg.shadowing_sigma_db > 0 else 0.0)
        snr = snr_per_prb(radio, dist, shadow)
        lam = np.full(dist.size, cfg.arrival_rate_pps[cls.value])
        req = required_prbs(radio, snr, lam, cls, qos, target=0.5)
        rep = float(rng.uniform(0.0, 1.0))
        # holdings are provisional until the pool is split below
        prof = TenantProfile(tid, role, cls, qos, reputation=rep, prbs_required=req,
                             prbs_held=req, num_ues=cfg.ues_per_tenant)
        tenants.append(Tenant(prof, snr, lam))
    buyers = [t for t in tenants if t.profile.role == Role.BUYER]
    sellers = [t for t in tenants if t.profile.role == Role.SELLER]
    for t in buyers:
        t.profile.prbs_held = int(np.floor(cfg.buyer_lease_fraction * t.profile.prbs_required))
    pool = cfg.num_prbs - sum(t.profile.prbs_held for t in buyers)
    if pool < 0:
        raise ConfigError(f"buyer leases exceed the {cfg.num_prbs} available PRBs")
    share, extra = divmod(pool, len(sellers))
    for k, t in enumerate(sellers):
        p = t.profile
        p.prbs_held = share + (1 if k < extra else 0)
        # a fixed share of the holdings, never into the seller's own requirement
        offer = int(np.floor(cfg.seller_offer_fraction * p.prbs_held))
        p.prbs_max_sellable = int(max(0, min(cfg.qty_max, offer, p.prbs_held - p.prbs_required)))
        p.__post_init__()
    for t in tenants:
        t.satisfaction = tenant_satisfaction(radio, t.snr, t.arrivals, t.profile.service_class,
                                             t.profile.qos, t.profile.prbs_held)
    return buyers, sellers


def match_sellers(num_coalitions: int, num_sellers: int, rank: int) -> tuple:
    """Sellers serving the coalition of the given reputation rank.

    With fewer coalitions than sellers, seller m serves coalition ``m mod C``
    (sellers then compete for the same coalition); otherwise coalition k is
    served by seller ``k mod M`` behind any higher-ranked coalitions.
    """
    if num_coalitions <= num_sellers:
        return tuple(m for m in range(num_sellers) if m % num_coalitions == rank)
    return (rank % num_sellers,)


@dataclass
class StepResult:
    leader_rewards: np.ndarray
    follower_rewards: np.ndarray
    filled: np.ndarray  # per follower slot
    sold: np.ndarray  # per seller
    clipped: int
    leader_next_state: np.ndarray


@dataclass
class MarketEnv:
    cfg: ExperimentConfig
    buyers: list
    sellers: list
    prices: np.ndarray
    quantities: np.ndarray
    use_coalitions: bool = True
    partition: coal.CoalitionPartition | None = None
    ranking: list = field(default_factory=list)
    game: StackelbergGame | None = None
    last_prices: np.ndarray | None = None
    last_sold: np.ndarray | None = None
    last_weights: np.ndarray | None = None
    iteration: int = 0
    violations: int = 0
    _worth: dict = field(default_factory=dict, repr=False)
    _games: dict = field(default_factory=dict, repr=False)

    @property
    def num_sellers(self) -> int:
        return len(self.sellers)

    @property
    def num_buyers(self) -> int:
        return len(self.buyers)

    @property
    def unit_bw(self) -> float:
        return self.cfg.prb_bandwidth_hz / self.cfg.hz_per_unit

    @property
    def reputation(self) -> dict:
        return {i: t.profile.reputation for i, t in enumerate(self.buyers)}

    @property
    def split_weight(self) -> dict:
        """Payoff-split contribution of each buyer: reputation times its PRB shortfall."""
        return {i: t.profile.reputation * t.profile.shortfall for i, t in enumerate(self.buyers)}

    @property
    def caps(self) -> np.ndarray:
        return np.array([t.profile.prbs_max_sellable for t in self.sellers], dtype=float)

    def pooled(self, members) -> FollowerSpec:
        ts = [self.buyers[i] for i in members]
        short = np.array([t.profile.shortfall for t in ts], dtype=float)
        sat = np.array([t.satisfaction for t in ts])
        pooled_sat = float(sat @ short / short.sum()) if short.sum() > 0 else float(sat.mean())
        return FollowerSpec(
            reputation=float(sum(t.profile.reputation for t in ts)),
            shortfall=float(short.sum()),
            satisfaction=pooled_sat,
            num_members=len(ts),
        )

    def coalition_worth(self, members, ref_price: float) -> float:
        """Best utility a coalition could reach alone at a single reference price."""
        key = (tuple(sorted(members)), float(ref_price))
        if key not in self._worth:
            self._worth[key] = self._solo_worth(key[0], key[1])
        return self._worth[key]

    def _solo_worth(self, members, ref_price):
        f = self.pooled(members)
        game = StackelbergGame(
            price_grid=tuple(price_grid(self.cfg)), qty_grid=tuple(qty_grid(self.cfg)),
            caps=(float(self.caps.sum()),), followers=(f,),
            mno_price=self.cfg.mno_price, unit_bw=self.unit_bw,
            value_scale=self.cfg.value_scale, signaling_coeff=self.cfg.signaling_cost_coeff,
        )
        br = follower_best_response(game, [ref_price])
        _, fu, _ = payoffs(game, [ref_price], br.quantities)
        return float(fu[0])

    def form_coalitions(self) -> coal.CoalitionPartition:
        buyers = list(range(self.num_buyers))
        rep = self.reputation
        if self.use_coalitions:
            ref = float(np.mean(self.prices))
            res = coal.form_coalitions(buyers, lambda c: self.coalition_worth(c, ref), rep,
                                       weight=self.split_weight)
            part = res.partition
        else:
            part = coal.CoalitionPartition.build(coal.init_partition(buyers), None, rep)
        self.partition = part
        self.ranking = coal.rank_coalitions(part)
        key = part.label()
        if key in self._games:
            self.game = self._games[key]
            return part
        C = len(part.coalitions)
        followers = []
        for r, ci in enumerate(self.ranking):
            spec = self.pooled(part.coalitions[ci])
            followers.append(FollowerSpec(spec.reputation, spec.shortfall, spec.satisfaction,
                                          spec.num_members, match_sellers(C, self.num_sellers, r)))
        self.game = StackelbergGame(
            price_grid=tuple(price_grid(self.cfg)), qty_grid=tuple(qty_grid(self.cfg)),
            caps=tuple(self.caps), followers=tuple(followers),
            mno_price=self.cfg.mno_price, unit_bw=self.unit_bw,
            value_scale=self.cfg.value_scale, signaling_coeff=self.cfg.signaling_cost_coeff,
            qos_weighted_revenue=self.cfg.qos_weighted_revenue,
        )
        self._games[key] = self.game
        return part

    @property
    def num_active(self) -> int:
        return len(self.game.followers) if self.game is not None else self.num_buyers

    def leader_state(self) -> np.ndarray:
        """Previous-slot purchased quantities per follower slot."""
        return self.quantities.copy()

    def follower_members(self, slot: int) -> tuple:
        return self.partition.coalitions[self.ranking[slot]]


def env_reset(cfg: ExperimentConfig, seed: int, use_coalitions: bool = True) -> MarketEnv:
    rng = np.random.default_rng(seed)
    buyers, sellers = build_tenants(cfg, rng)
    pg, qg = price_grid(cfg), qty_grid(cfg)
    env = MarketEnv(
        cfg=cfg, buyers=buyers, sellers=sellers,
        prices=np.full(len(sellers), pg[(len(pg) - 1) // 2]),
        quantities=np.full(len(buyers), qg[(len(qg) - 1) // 2]),
        use_coalitions=use_coalitions,
    )
    env.last_sold = np.zeros(len(sellers))
    env.form_coalitions()
    # the opening slot's purchases are what the midpoint request would have bought
    fills = _fills(env, env.prices, env.quantities)
    env.quantities = _slot_quantities(env, fills)
    env.last_sold = fills.sum(axis=0)
    return env


def _fills(env, prices, quantities):
    q = np.asarray(quantities, dtype=float)[: env.num_active]
    return allocate(env.game, prices, q)


def _slot_quantities(env, fills):
    out = np.zeros(env.num_buyers)
    out[: fills.shape[0]] = fills.sum(axis=1)
    return out


def env_step(env: MarketEnv, prices, quantities) -> StepResult:
    """Apply grid prices (per seller) and requested quantities (per follower slot)."""
    prices = np.asarray(prices, dtype=float)
    req = np.asarray(quantities, dtype=float)[: env.num_active]
    game = env.game
    lu_prev = (prices - env.cfg.mno_price) * env.unit_bw * env.last_sold
    if game.qos_weighted_revenue and env.last_weights is not None:
        lu_prev = lu_prev * env.last_weights
    lu_now, fu, fills = payoffs(game, prices, req)
    if env.cfg.seller_reward_timing == "current":
        lu_prev = lu_now
    filled = fills.sum(axis=1)
    clipped = int(np.sum(filled + 1e-9 < req))
    env.violations += clipped
    follower_rewards = np.zeros(env.num_buyers)
    follower_rewards[: env.num_active] = fu
    env.last_prices = env.prices
    env.prices = prices.copy()
    env.quantities = _slot_quantities(env, fills)
    env.last_sold = fills.sum(axis=0)
    env.last_weights = (np.array([f.satisfaction for f in game.followers]) @ fills
                        / np.maximum(env.last_sold, 1e-12))
    env.iteration += 1
    return StepResult(lu_prev, follower_rewards, env.quantities.copy(), env.last_sold.copy(),
                      clipped, env.leader_state())

