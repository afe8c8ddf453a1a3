"""Experiment configuration: defaults, strict YAML overrides, validation."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

ALGORITHMS = ("cost_maddpg", "st_maddpg", "sa_ddpg", "random")
SWEEP_AXES = ("none", "bandwidth", "num_sellers", "num_buyers")

# tenants 1-2 eMBB, 3-4 uRLLC, 5 mMTC
TENANT_CLASSES = ("eMBB", "eMBB", "uRLLC", "uRLLC", "mMTC")
TENANT_R_MIN_KBPS = (500.0, 500.0, 10.0, 10.0, 15.0)
TENANT_TAU_MAX_MS = (100.0, 100.0, 10.0, 10.0, 100.0)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str = "default"
    # population (5 tenants)
    num_sellers: int = 2
    num_buyers: int = 3
    ues_per_tenant: int = 50
    # radio
    system_bandwidth_hz: float = 20e6
    num_prbs: int = 100
    bs_power_dbm: float = 30.0
    noise_density_dbm_hz: float = -174.0
    carrier_freq_mhz: float = 2000.0
    area_side_m: float = 500.0
    min_distance_m: float = 10.0
    shadowing_sigma_db: float = 0.0
    packet_size_bits: float = 1000.0
    arrival_rate_pps: dict = field(default_factory=lambda: {"eMBB": 100.0, "uRLLC": 100.0, "mMTC": 5.0})
    eta: float = 1.0
    # market
    mno_price: float = 1.0
    price_min: float = 1.0
    price_max: float = 2.0
    price_grid_points: int = 100
    qty_min: int = 1
    qty_max: int = 50
    qty_grid_points: int = 50
    signaling_cost_coeff: float = 0.05
    value_scale: float = 8.0
    hz_per_unit: float = 1e5
    buyer_lease_fraction: float = 0.25
    seller_offer_fraction: float = 0.5
    qos_weighted_revenue: bool = False
    # learning
    iterations: int = 2500
    hidden_layers: int = 2
    hidden_units: int = 128
    gamma: float = 0.9
    replay_capacity: int = 100_000
    batch_size: int = 128
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    tau: float = 1e-3
    noise_start: float = 0.3
    noise_end: float = 0.01
    noise_decay_frac: float = 0.6
    leader_target: str = "stackelberg"
    follower_target: str = "ddpg"
    stackelberg_grid_points: int = 16
    reward_scale: float = 0.0  # 0 -> derived from the market scale
    # "previous": seller paid on last slot's purchases at today's price; "current": on today's
    seller_reward_timing: str = "previous"
    # harness
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    window: int = 250
    sweep_axis: str = "none"
    sweep_values: list = field(default_factory=list)
    oracle_budget: float = 1e8
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    @property
    def prb_bandwidth_hz(self) -> float:
        return self.system_bandwidth_hz / self.num_prbs

    @property
    def num_tenants(self) -> int:
        return self.num_sellers + self.num_buyers

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.num_sellers >= 1, "num_sellers must be >= 1")
        need(self.num_buyers >= 1, "num_buyers must be >= 1 (no buyers configured)")
        need(self.ues_per_tenant >= 1, "ues_per_tenant must be >= 1")
        need(self.system_bandwidth_hz > 0 and self.num_prbs >= 1, "bandwidth and PRB count must be positive")
        need(self.area_side_m > 0 and 0 < self.min_distance_m, "geometry must be positive")
        need(self.packet_size_bits > 0 and self.eta > 0, "packet size and eta must be positive")
        need(self.shadowing_sigma_db >= 0, "shadowing_sigma_db must be >= 0")
        need(set(self.arrival_rate_pps) == {"eMBB", "uRLLC", "mMTC"},
             "arrival_rate_pps needs exactly eMBB, uRLLC and mMTC entries")
        need(all(v >= 0 for v in self.arrival_rate_pps.values()), "arrival rates must be >= 0")
        need(0 < self.price_min < self.price_max, "price range must satisfy 0 < min < max")
        need(self.price_grid_points >= 1 and self.qty_grid_points >= 1, "grids need >= 1 point")
        need(1 <= self.qty_min <= self.qty_max, "quantity range must satisfy 1 <= min <= max")
        need(self.qty_grid_points <= self.qty_max - self.qty_min + 1,
             "quantity grid has more points than integers in its range")
        need(self.mno_price >= 0, "mno_price must be >= 0")
        need(self.signaling_cost_coeff >= 0 and self.value_scale >= 0, "market scales must be >= 0")
        need(self.hz_per_unit > 0, "hz_per_unit must be positive")
        need(0 <= self.buyer_lease_fraction <= 1, "buyer_lease_fraction must lie in [0, 1]")
        need(0 <= self.seller_offer_fraction <= 1, "seller_offer_fraction must lie in [0, 1]")
        need(self.iterations >= 1, "iterations must be >= 1")
        need(self.hidden_layers >= 1 and self.hidden_units >= 1, "network size must be positive")
        need(0 <= self.gamma < 1, "gamma must lie in [0, 1)")
        need(self.replay_capacity >= self.batch_size >= 1, "need replay_capacity >= batch_size >= 1")
        need(self.lr_actor >= 0 and self.lr_critic >= 0, "learning rates must be non-negative")
        need(0 <= self.tau <= 1, "tau must lie in [0, 1]")
        need(self.noise_start >= 0 and self.noise_end >= 0, "noise scales must be >= 0")
        need(0 < self.noise_decay_frac <= 1, "noise_decay_frac must lie in (0, 1]")
        need(self.leader_target in ("stackelberg", "ddpg"), "leader_target must be stackelberg or ddpg")
        need(self.follower_target in ("stackelberg", "ddpg"), "follower_target must be stackelberg or ddpg")
        need(self.stackelberg_grid_points >= 2, "stackelberg_grid_points must be >= 2")
        need(self.reward_scale >= 0, "reward_scale must be >= 0")
        need(self.seller_reward_timing in ("previous", "current"),
             "seller_reward_timing must be previous or current")
        need(all(a in ALGORITHMS for a in self.algorithms), f"algorithms must be drawn from {ALGORITHMS}")
        need(len(self.seeds) >= 1, "need at least one seed")
        need(self.window >= 1, "window must be >= 1")
        need(self.sweep_axis in SWEEP_AXES, f"sweep_axis must be one of {SWEEP_AXES}")
        need(self.oracle_budget > 0, "oracle_budget must be positive")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of every parameter except where outputs go."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(name, value, default, line):
    where = f"line {line}: {name}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a sign (1.0e7) as strings
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return value
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a mapping, got {value!r}")
        return value
    return value


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse YAML text; an empty document yields the defaults."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if node is None:
        return ExperimentConfig()
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{source}: line {node.start_mark.line + 1}: top level must be a mapping")
    defaults = ExperimentConfig()
    overrides = {}
    data = yaml.safe_load(text)
    for key_node, _ in node.value:
        key, line = key_node.value, key_node.start_mark.line + 1
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}: line {line}: unknown key {key!r}")
        overrides[key] = _coerce(key, data[key], getattr(defaults, key), line)
    if "arrival_rate_pps" in overrides:
        overrides["arrival_rate_pps"] = {**defaults.arrival_rate_pps, **overrides["arrival_rate_pps"]}
    try:
        return ExperimentConfig(**overrides)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
