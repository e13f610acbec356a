"""Receiver model: distance-based path loss, RSSI, SINR and capture resolution.

All power bookkeeping is dBm at the interfaces; interference is summed in
linear milliwatts, never in dB. Pure functions, safe from any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

# Friis constant 20*log10(4*pi/c); free-space loss in dB is then
# 20*log10(d_m) + 20*log10(f_hz) + this.
_FRIIS_CONST_DB = -147.55221677811664

REFERENCE_DISTANCE_M = 1.0   # distances below this clamp to the reference loss


@dataclass(frozen=True, slots=True)
class RadioParams:
    """Transmit-side power budget and the receiver's noise floor."""

    tx_power_dbm: float = 20.0
    cable_loss_db: float = 3.0
    noise_floor_dbm: float = -99.0     # thermal for 10 MHz (-104) + 5 dB noise figure
    carrier_freq_hz: float = 5.9e9

    @property
    def radiated_power_dbm(self) -> float:
        return self.tx_power_dbm - self.cable_loss_db


@dataclass(frozen=True, slots=True)
class FreeSpace:
    """Friis free-space propagation at the carrier frequency."""


@dataclass(frozen=True, slots=True)
class LogDistance:
    """Reference loss at d0 plus 10*k*log10(d/d0); k=2 coincides with free space."""

    exponent: float = 2.0


LossModel = FreeSpace | LogDistance


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(mw)


def path_loss_db(distance: float, model: LossModel, radio: RadioParams) -> float:
    """Propagation loss in dB; distances below the reference distance clamp."""
    d = max(distance, REFERENCE_DISTANCE_M)
    free_space_at = lambda dist: (
        20.0 * math.log10(dist) + 20.0 * math.log10(radio.carrier_freq_hz) + _FRIIS_CONST_DB
    )
    if isinstance(model, FreeSpace):
        return free_space_at(d)
    loss_d0 = free_space_at(REFERENCE_DISTANCE_M)
    return loss_d0 + 10.0 * model.exponent * math.log10(d / REFERENCE_DISTANCE_M)


def rssi_dbm(radio: RadioParams, distance: float, model: LossModel) -> float:
    """Received power: radiated power minus path loss."""
    return radio.radiated_power_dbm - path_loss_db(distance, model, radio)


def sinr_db(signal_mw: float, interference_plus_noise_mw: float) -> float:
    """10*log10(S / (I+N)), all in linear milliwatts."""
    if signal_mw <= 0.0:
        raise ValueError("signal power must be positive")
    if interference_plus_noise_mw <= 0.0:
        raise ValueError("interference+noise must be positive")
    return 10.0 * math.log10(signal_mw / interference_plus_noise_mw)


def resolve_reception(
    participants: Sequence[tuple[int, float, int]],
    radio: RadioParams,
    model: LossModel,
    sinr_th_db: float,
) -> Optional[int]:
    """Capture resolution for a collision set at a single observer.

    participants: (node_id, distance to the observer in m, tx_time) per
    collider. Each signal's SINR is its own received power over the linear
    sum of the others plus the noise floor. The unique participant above
    the threshold wins and its packet is received clean; otherwise None and
    the damaged transmission stands.
    """
    if len(participants) < 2:
        raise ValueError("capture resolution needs at least two participants")
    powers = [dbm_to_mw(rssi_dbm(radio, dist, model)) for _, dist, _ in participants]
    noise = dbm_to_mw(radio.noise_floor_dbm)
    total = sum(powers) + noise
    threshold = 10.0 ** (sinr_th_db / 10.0)
    winner = None
    for (node_id, _, _), p in zip(participants, powers):
        if p > threshold * (total - p):
            if winner is not None:
                return None    # not unique (only possible for thresholds < 0 dB)
            winner = node_id
    return winner
