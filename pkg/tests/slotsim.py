"""Independent microsecond-stepping CSMA/CA simulator used as a test oracle.

Everything here works in integer microseconds with flat per-node state and
a channel state machine that walks the timeline one event tick at a time
(idle stretches are skipped because nothing can change between pending
instants, which is equivalent to stepping every microsecond). No queue
structure, no engine imports: the MAC rules are applied directly.

The PRNG draw discipline matches the engine's documented order: initial
jitter per node id, then per busy period backoff draws in time order
followed by replacement jitter draws for colliders (join order) and the
transmitter.
"""

from __future__ import annotations

import random


def simulate(
    *,
    n_nodes: int,
    base_times_us: list[int],
    slot_us: int,
    pd_us: int,
    ptxtime_us: int,
    aifs_us: int,
    cw: int,
    period_us: int,
    jitter_us: int,
    duration_us: int,
    seed: int,
) -> list[dict]:
    rng = random.Random(seed)
    pending: dict[int, int] = {}
    bc = {i: -1 for i in range(n_nodes)}
    for i in range(n_nodes):
        pending[i] = base_times_us[i] + rng.randint(0, 2 * jitter_us)

    last_s: int | None = None
    last_e = -1
    aifs_until = -1
    records: list[dict] = []

    def finish_packet(node: int, t_fin: int) -> None:
        nxt = t_fin + period_us
        if nxt < duration_us:
            pending[node] = nxt + rng.randint(0, 2 * jitter_us)
            bc[node] = -1

    while pending:
        t = min(pending.values())
        transmitter = None
        if last_s is not None and t <= aifs_until:
            # inside the mandatory idle gap after the last transmission
            for i in sorted(i for i, pt in pending.items() if pt == t):
                if bc[i] < 0:
                    pending[i] = t + aifs_us
                else:
                    anchor = t - bc[i] * slot_us
                    idle = last_s - anchor
                    nb = bc[i] - (idle // slot_us if idle > 0 else 0)
                    if nb < 0:
                        nb = 0
                    t_new = last_e + aifs_us + nb * slot_us
                    if t_new == t:
                        transmitter = i     # counter exhausted: transmits now
                        break
                    bc[i] = nb
                    pending[i] = t_new
            if transmitter is None:
                continue
        else:
            transmitter = min(i for i, pt in pending.items() if pt == t)

        # busy period from t; blind same-window starters join the collision
        s = t
        e = s + ptxtime_us
        pd_end = s + pd_us
        parts = [(transmitter, s)]
        del pending[transmitter]
        damaged = False
        while True:
            nxt = None
            for pt in pending.values():
                if pt < e and (nxt is None or pt < nxt):
                    nxt = pt
            if nxt is None:
                break
            for i in sorted(i for i, pt in pending.items() if pt == nxt):
                if nxt <= pd_end:
                    damaged = True
                    parts.append((i, nxt))
                    e = nxt + ptxtime_us
                    del pending[i]
                else:
                    if bc[i] < 0:
                        bc[i] = rng.randint(0, cw)
                    else:
                        anchor = nxt - bc[i] * slot_us
                        idle = s - anchor
                        nb = bc[i] - (idle // slot_us if idle > 0 else 0)
                        bc[i] = nb if nb > 0 else 0
                    pending[i] = e + aifs_us + bc[i] * slot_us

        records.append(
            dict(
                start=s,
                duration=e - s,
                damaged=damaged,
                participants=tuple(i for i, _ in parts),
                participant_tx=tuple(pt for _, pt in parts),
            )
        )
        last_s, last_e, aifs_until = s, e, e + aifs_us
        for i, pt in parts[1:]:
            finish_packet(i, pt)
        finish_packet(transmitter, s)

    return records
