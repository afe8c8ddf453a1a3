"""Radio and QoS model for a single-cell OFDMA base station.

Everything here is a pure function of its arguments. Rates are Shannon
rates over the UE's allocated bandwidth, delays come from an M/M/1 queue
fed by Poisson packet arrivals, and QoS satisfaction is a logistic curve
around the tenant threshold.

Units: distances in metres, carrier in MHz, powers in dBm (converted to mW
internally), bandwidth in Hz, rates in bit/s, delays in seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import expit


class ServiceClass(str, Enum):
    EMBB = "eMBB"
    URLLC = "uRLLC"
    MMTC = "mMTC"


class UnstableQueueError(ValueError):
    """Service rate does not exceed the arrival rate."""


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(np.asarray(mw, dtype=float))


@dataclass(frozen=True)
class RadioConfig:
    system_bandwidth_hz: float = 20e6
    num_prbs: int = 100
    bs_power_dbm: float = 30.0
    noise_density_dbm_hz: float = -174.0
    carrier_freq_mhz: float = 2000.0
    packet_size_bits: float = 1000.0
    shadowing_sigma_db: float = 0.0

    def __post_init__(self):
        for name in ("system_bandwidth_hz", "carrier_freq_mhz", "packet_size_bits"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if int(self.num_prbs) != self.num_prbs or self.num_prbs < 1:
            raise ValueError(f"num_prbs must be a positive integer, got {self.num_prbs}")
        for name in ("bs_power_dbm", "noise_density_dbm_hz"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing_sigma_db must be >= 0")

    @property
    def prb_bandwidth_hz(self) -> float:
        return self.system_bandwidth_hz / self.num_prbs

    @property
    def prb_power_mw(self) -> float:
        # equal power split over all PRBs
        return float(dbm_to_mw(self.bs_power_dbm)) / self.num_prbs


@dataclass(frozen=True)
class UeState:
    ue_id: int
    tenant_id: int
    distance_m: float
    prbs_assigned: float
    arrival_rate: float = 0.0
    service_class: ServiceClass = ServiceClass.EMBB

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError(f"distance_m must be > 0, got {self.distance_m}")
        if self.prbs_assigned < 0:
            raise ValueError("prbs_assigned must be >= 0")
        if self.arrival_rate < 0:
            raise ValueError("arrival_rate must be >= 0")


@dataclass(frozen=True)
class TenantQos:
    r_min_bps: float
    tau_max_s: float
    eta: float = 1.0

    def __post_init__(self):
        if not (self.r_min_bps > 0 and self.tau_max_s > 0 and self.eta > 0):
            raise ValueError("r_min_bps, tau_max_s and eta must all be > 0")


def path_loss_db(distance_m, freq_mhz):
    """Free-space style path loss: 20 log10(d) + 20 log10(f) - 27.55 dB."""
    d = np.asarray(distance_m, dtype=float)
    f = np.asarray(freq_mhz, dtype=float)
    if np.any(d <= 0) or np.any(f <= 0):
        raise ValueError("distance and frequency must be positive")
    pl = 20.0 * np.log10(d) + 20.0 * np.log10(f) - 27.55
    return float(pl) if pl.ndim == 0 else pl


def sinr_linear(cfg: RadioConfig, ue: UeState, shadowing_db: float = 0.0) -> float:
    """SNR of a UE over its allocated PRBs (single cell, so no interference).

    Received power is the per-PRB power share times the number of PRBs,
    attenuated by path loss (plus an optional shadowing term in dB); noise
    is the density integrated over the same bandwidth.
    """
    if ue.prbs_assigned <= 0:
        raise ValueError("SINR undefined without assigned PRBs")
    return float(snr_per_prb(cfg, ue.distance_m, shadowing_db))


def snr_per_prb(cfg: RadioConfig, distance_m, shadowing_db=0.0):
    # power and noise both scale with the PRB count, so the ratio is per-PRB
    gain_db = -(np.asarray(path_loss_db(distance_m, cfg.carrier_freq_mhz)) + shadowing_db)
    rx_mw = cfg.prb_power_mw * 10.0 ** (gain_db / 10.0)
    noise_mw = dbm_to_mw(cfg.noise_density_dbm_hz) * cfg.prb_bandwidth_hz
    return rx_mw / noise_mw


def ue_rate_bps(cfg: RadioConfig, ue: UeState, sinr: float) -> float:
    if sinr < 0:
        raise ValueError("sinr must be non-negative")
    return ue.prbs_assigned * cfg.prb_bandwidth_hz * math.log2(1.0 + sinr)


def tenant_rate_bps(rates: Sequence[float]) -> float:
    """Sum of per-UE rates (written as a sum even though it is called an average)."""
    if len(rates) == 0:
        raise ValueError("tenant has no UEs")
    return float(np.sum(rates))


def ue_delay_s(service_rate: float, arrival_rate: float) -> float:
    if service_rate <= arrival_rate:
        raise UnstableQueueError(
            f"service rate {service_rate} must exceed arrival rate {arrival_rate}"
        )
    return 1.0 / (service_rate - arrival_rate)


def tenant_delay_s(delays: Sequence[float]) -> float:
    if len(delays) == 0:
        raise ValueError("tenant has no UEs")
    return float(np.sum(delays))


def packet_service_rate(rate_bps, packet_size_bits):
    return np.asarray(rate_bps, dtype=float) / packet_size_bits


def qos_rate(r, q: TenantQos):
    """Rate satisfaction in (0, 1); the gap to r_min is measured in units of r_min."""
    return expit(q.eta * (np.asarray(r, dtype=float) - q.r_min_bps) / q.r_min_bps)


def qos_delay(tau, q: TenantQos):
    """Delay satisfaction in (0, 1); an infinite delay gives exactly 0."""
    tau = np.asarray(tau, dtype=float)
    return expit(q.eta * (q.tau_max_s - tau) / q.tau_max_s)


def tenant_satisfaction(
    cfg: RadioConfig,
    snr: np.ndarray,
    arrival_rates: np.ndarray,
    service_class: ServiceClass,
    qos: TenantQos,
    prbs: float,
) -> float:
    """Aggregate QoS satisfaction of a tenant holding ``prbs`` PRBs.

    The PRBs are shared equally across the tenant's UEs (a time-averaged
    fractional share). eMBB and mMTC are judged on the summed rate against
    ``num_ues * r_min``; uRLLC on the summed delay against ``num_ues * tau_max``.
    mMTC with less than one PRB is unsatisfied.
    """
    snr = np.asarray(snr, dtype=float)
    k = snr.size
    if prbs <= 0 or (service_class == ServiceClass.MMTC and prbs < 1):
        return 0.0
    rates = (prbs / k) * cfg.prb_bandwidth_hz * np.log2(1.0 + snr)
    if service_class == ServiceClass.URLLC:
        mu = packet_service_rate(rates, cfg.packet_size_bits)
        lam = np.asarray(arrival_rates, dtype=float)
        if np.any(mu <= lam):
            return 0.0
        total = tenant_delay_s(1.0 / (mu - lam))
        scaled = TenantQos(qos.r_min_bps, qos.tau_max_s * k, qos.eta)
        return float(qos_delay(total, scaled))
    total = tenant_rate_bps(rates)
    scaled = TenantQos(qos.r_min_bps * k, qos.tau_max_s, qos.eta)
    return float(qos_rate(total, scaled))


def required_prbs(cfg, snr, arrival_rates, service_class, qos, target, max_prbs=None) -> int:
    """Fewest whole PRBs bringing the tenant's satisfaction to ``target``."""
    top = int(max_prbs if max_prbs is not None else cfg.num_prbs)
    for n in range(1, top + 1):
        if tenant_satisfaction(cfg, snr, arrival_rates, service_class, qos, n) >= target:
            return n
    return top
