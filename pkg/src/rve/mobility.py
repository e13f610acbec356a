"""Mobility traces: NS2 parsing, synthetic grid/disc models, per-node CSV I/O.

A trace row is one vehicle-state record (the payload each node broadcasts).
Trace files are plain UTF-8 CSV, one record per line, no header:

    node_id,t,lat,lon,height,speed,heading

with t in seconds from scenario start, positions geodetic (WGS-84),
speed in m/s and heading in compass degrees (north 0, east 90).
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from pathlib import Path

from .geo import (
    DEFAULT_REFERENCE,
    EnuCoord,
    GeodeticCoord,
    ecef_to_enu,
    ecef_to_geodetic,
    enu_to_ecef,
    geodetic_to_ecef,
)

TRACE_FIELDS = ("node_id", "t", "lat", "lon", "height", "speed", "heading")


class TraceError(ValueError):
    """Malformed trace input (carries a line number when one applies)."""


@dataclass(frozen=True, slots=True)
class BsmRecord:
    """One vehicle-state row: who, when, where, how fast, which way."""

    node_id: int
    t: float
    pos: GeodeticCoord
    speed: float
    heading: float


class MobilityTrace:
    """Per-node, time-sorted sequences of BsmRecord plus the scenario duration."""

    def __init__(self, nodes: dict[int, list[BsmRecord]], duration: float):
        for node_id, rows in nodes.items():
            if not rows:
                raise TraceError(f"node {node_id} has no records")
            for prev, cur in zip(rows, rows[1:]):
                if cur.t <= prev.t:
                    raise TraceError(f"node {node_id}: records not strictly increasing in t")
        self.nodes = nodes
        self.duration = float(duration)

    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    def records(self, node_id: int) -> list[BsmRecord]:
        return self.nodes[node_id]

    def all_records(self) -> list[BsmRecord]:
        """Every row, sorted by (t, node_id)."""
        merged = [r for rows in self.nodes.values() for r in rows]
        merged.sort(key=lambda r: (r.t, r.node_id))
        return merged

    def __len__(self) -> int:
        return len(self.nodes)


def _format_row(r: BsmRecord) -> str:
    return (
        f"{r.node_id},{r.t!r},{r.pos.lat!r},{r.pos.lon!r},"
        f"{r.pos.height!r},{r.speed!r},{r.heading!r}"
    )


def _parse_row(line: str, lineno: int) -> BsmRecord:
    parts = line.split(",")
    if len(parts) != len(TRACE_FIELDS):
        raise TraceError(f"line {lineno}: expected {len(TRACE_FIELDS)} fields, got {len(parts)}")
    try:
        node_id = int(parts[0])
        t, lat, lon, height, speed, heading = (float(v) for v in parts[1:])
    except ValueError as exc:
        raise TraceError(f"line {lineno}: {exc}") from None
    if node_id < 0:
        raise TraceError(f"line {lineno}: negative node id")
    return BsmRecord(node_id, t, GeodeticCoord(lat, lon, height), speed, heading % 360.0)


def split_per_node(trace: MobilityTrace, out_dir: str | Path) -> list[Path]:
    """Write one node_<id>.csv per node, rows in trace order. Returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for node_id in trace.node_ids():
        path = out / f"node_{node_id}.csv"
        path.write_text(
            "".join(_format_row(r) + "\n" for r in trace.records(node_id)),
            encoding="utf-8",
        )
        paths.append(path)
    return paths


def write_trace_file(trace: MobilityTrace, path: str | Path) -> Path:
    """Write all rows to a single CSV, sorted by (t, node_id)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        "".join(_format_row(r) + "\n" for r in trace.all_records()), encoding="utf-8"
    )
    return path


def _rows_to_trace(rows: list[BsmRecord]) -> MobilityTrace:
    nodes: dict[int, list[BsmRecord]] = {}
    for r in rows:
        nodes.setdefault(r.node_id, []).append(r)
    for seq in nodes.values():
        seq.sort(key=lambda r: r.t)
    duration = max((r.t for r in rows), default=0.0)
    return MobilityTrace(nodes, duration)


def load_trace_file(path: str | Path) -> MobilityTrace:
    """Read a combined trace CSV (any row order)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append(_parse_row(line, lineno))
    if not rows:
        raise TraceError(f"{path}: empty trace")
    return _rows_to_trace(rows)


def load_trace_dir(path: str | Path) -> MobilityTrace:
    """Read a directory of node_<id>.csv files produced by split_per_node."""
    files = sorted(Path(path).glob("node_*.csv"))
    if not files:
        raise TraceError(f"{path}: no node_*.csv files")
    rows = []
    for f in files:
        with open(f, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                rows.append(_parse_row(line, lineno))
    return _rows_to_trace(rows)


# --- NS2 mobility format ---------------------------------------------------
#
# Accepted statements (anything else is rejected with its line number):
#   $node_(7) set X_ 12.5          initial coordinates, likewise Y_ and Z_
#   $ns_ at 3.0 "$node_(7) setdest 40.0 55.0 8.0"
_RE_SET = re.compile(r'^\$node_\((\d+)\)\s+set\s+([XYZ])_\s+(\S+)$')
_RE_SETDEST = re.compile(
    r'^\$ns_?\s+at\s+(\S+)\s+"\$node_\((\d+)\)\s+setdest\s+(\S+)\s+(\S+)\s+(\S+)"$'
)


def parse_ns2_trace(
    text: str,
    period: float = 0.2,
    ref: GeodeticCoord = DEFAULT_REFERENCE,
    duration: float | None = None,
) -> MobilityTrace:
    """Parse an NS2 mobility log into sampled vehicle-state rows.

    Local Cartesian coordinates are interpreted as ENU around ``ref`` and
    converted to geodetic. Piecewise constant-velocity trajectories implied
    by the setdest statements are sampled every ``period`` seconds from t=0
    through the last movement (or ``duration`` when given).
    """
    initial: dict[int, dict[str, float]] = {}
    moves: dict[int, list[tuple[float, float, float, float]]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _RE_SET.match(line)
        if m:
            node, axis, value = int(m.group(1)), m.group(2), m.group(3)
            try:
                initial.setdefault(node, {})[axis] = float(value)
            except ValueError:
                raise TraceError(f"line {lineno}: bad coordinate {value!r}") from None
            continue
        m = _RE_SETDEST.match(line)
        if m:
            try:
                t = float(m.group(1))
                node = int(m.group(2))
                x, y, speed = float(m.group(3)), float(m.group(4)), float(m.group(5))
            except ValueError:
                raise TraceError(f"line {lineno}: bad setdest values") from None
            if t < 0 or speed < 0:
                raise TraceError(f"line {lineno}: negative time or speed")
            moves.setdefault(node, []).append((t, x, y, speed))
            continue
        raise TraceError(f"line {lineno}: unrecognized statement {line!r}")

    for node in moves:
        if node not in initial or "X" not in initial[node] or "Y" not in initial[node]:
            raise TraceError(f"setdest references node {node} with no initial position")

    if not initial:
        return MobilityTrace({}, 0.0) if duration is None else MobilityTrace({}, duration)

    # Build per-node constant-velocity segments:
    # (t_start, t_end, x0, y0, vx, vy, speed); t_end may be inf for a hold.
    segments: dict[int, list[tuple[float, float, float, float, float, float, float]]] = {}
    last_motion = 0.0
    for node, axes in initial.items():
        x, y = axes["X"], axes["Y"]
        segs = []
        t_cur = 0.0
        for (t_ev, dest_x, dest_y, speed) in sorted(moves.get(node, [])):
            if t_ev > t_cur:
                segs.append((t_cur, t_ev, x, y, 0.0, 0.0, 0.0))
                t_cur = t_ev
            # position may already have advanced past t_ev through an
            # interrupted previous move; truncate that segment
            if segs and segs[-1][1] > t_ev:
                ts, _, x0, y0, vx, vy, sp = segs[-1]
                x = x0 + vx * (t_ev - ts)
                y = y0 + vy * (t_ev - ts)
                segs[-1] = (ts, t_ev, x0, y0, vx, vy, sp)
                t_cur = t_ev
            dist = math.hypot(dest_x - x, dest_y - y)
            if speed > 0.0 and dist > 0.0:
                dur = dist / speed
                vx = (dest_x - x) * speed / dist
                vy = (dest_y - y) * speed / dist
                segs.append((t_cur, t_cur + dur, x, y, vx, vy, speed))
                x, y = dest_x, dest_y
                t_cur += dur
                last_motion = max(last_motion, t_cur)
            # speed 0 or zero distance: node keeps holding
        segs.append((t_cur, math.inf, x, y, 0.0, 0.0, 0.0))
        segments[node] = segs

    horizon = duration if duration is not None else last_motion
    n_samples = max(1, int(math.floor(horizon / period + 1e-9)) + 1)

    nodes: dict[int, list[BsmRecord]] = {}
    for node in sorted(initial):
        z = initial[node].get("Z", 0.0)
        segs = segments[node]
        rows = []
        si = 0
        heading = 0.0
        for k in range(n_samples):
            t = k * period
            while si + 1 < len(segs) and t >= segs[si][1] - 1e-12:
                si += 1
            ts, _, x0, y0, vx, vy, speed = segs[si]
            x = x0 + vx * (t - ts)
            y = y0 + vy * (t - ts)
            if speed > 0.0:
                heading = math.degrees(math.atan2(vx, vy)) % 360.0
            pos = ecef_to_geodetic(enu_to_ecef(EnuCoord(x, y, z), ref))
            rows.append(BsmRecord(node, t, pos, speed, heading))
        nodes[node] = rows
    return MobilityTrace(nodes, horizon)


# --- Synthetic mobility models ---------------------------------------------

def grid_footprint(n: int, spacing: float, side: float = 60.0) -> tuple[float, float]:
    """Occupied width x row-band depth of the grid placement, in meters."""
    row_len = int(side // spacing) + 1
    n_rows = (n + row_len - 1) // row_len
    return (min(n, row_len) - 1) * spacing, n_rows * spacing


def generate_grid_mobility(
    n: int,
    spacing: float,
    speed: float = 0.0,
    duration: float = 40.0,
    period: float = 0.2,
    side: float = 60.0,
    ref: GeodeticCoord = DEFAULT_REFERENCE,
) -> MobilityTrace:
    """Nodes on a square-ish grid, all moving east at a common constant speed.

    Row length is floor(side/spacing)+1 positions starting at the local
    origin; rows fill row-major until n nodes are placed (last row may be
    partial). The shared velocity keeps every pairwise distance constant;
    the default of zero keeps the swarm parked around the observer.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if spacing <= 0:
        raise ValueError("spacing must be > 0")
    row_len = int(side // spacing) + 1
    starts = [((k % row_len) * spacing, (k // row_len) * spacing) for k in range(n)]
    heading = 90.0 if speed > 0 else 0.0

    n_samples = max(1, int(math.ceil(duration / period - 1e-9)))
    nodes: dict[int, list[BsmRecord]] = {}
    for node in range(n):
        e0, n0 = starts[node]
        rows = []
        for k in range(n_samples):
            t = k * period
            pos = ecef_to_geodetic(enu_to_ecef(EnuCoord(e0 + speed * t, n0, 0.0), ref))
            rows.append(BsmRecord(node, t, pos, speed, heading))
        nodes[node] = rows
    return MobilityTrace(nodes, duration)


def generate_disc_mobility(
    n: int,
    radius: float,
    speed_range: tuple[float, float] = (0.0, 15.0),
    change_period: float = 1.0,
    duration: float = 40.0,
    period: float = 0.2,
    seed: int = 0,
    ref: GeodeticCoord = DEFAULT_REFERENCE,
) -> MobilityTrace:
    """Nodes placed uniformly in a disc, random-walking inside its bounding square.

    Each node redraws speed and direction every change_period seconds and
    reflects off the square [-radius, radius]^2. Deterministic for a fixed
    seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    smin, smax = speed_range
    if smin < 0 or smax < smin:
        raise ValueError("invalid speed range")

    rng = random.Random(seed)
    n_samples = max(1, int(math.ceil(duration / period - 1e-9)))
    nodes: dict[int, list[BsmRecord]] = {}
    for node in range(n):
        r = radius * math.sqrt(rng.random())
        theta = rng.random() * 2.0 * math.pi
        x, y = r * math.cos(theta), r * math.sin(theta)
        vx = vy = 0.0
        speed = 0.0
        heading = 0.0
        next_change = 0.0
        rows = []
        for k in range(n_samples):
            t = k * period
            if radius > 0 and t >= next_change - 1e-12:
                speed = rng.uniform(smin, smax)
                direction = rng.random() * 2.0 * math.pi
                vx, vy = speed * math.cos(direction), speed * math.sin(direction)
                next_change += change_period
            if speed > 0.0:
                heading = math.degrees(math.atan2(vx, vy)) % 360.0
            pos = ecef_to_geodetic(enu_to_ecef(EnuCoord(x, y, 0.0), ref))
            rows.append(BsmRecord(node, t, pos, speed, heading))
            x += vx * period
            y += vy * period
            # fold back into the bounding square, flipping the velocity
            while x > radius or x < -radius:
                if x > radius:
                    x = 2.0 * radius - x
                else:
                    x = -2.0 * radius - x
                vx = -vx
            while y > radius or y < -radius:
                if y > radius:
                    y = 2.0 * radius - y
                else:
                    y = -2.0 * radius - y
                vy = -vy
        nodes[node] = rows
    return MobilityTrace(nodes, duration)


def trace_ecef_arrays(trace: MobilityTrace):
    """Per-node (times, ecef xyz) numpy arrays for fast position lookups."""
    import numpy as np

    out = {}
    for node_id in trace.node_ids():
        rows = trace.records(node_id)
        times = np.array([r.t for r in rows])
        xyz = np.empty((len(rows), 3))
        for i, r in enumerate(rows):
            p = geodetic_to_ecef(r.pos)
            xyz[i, 0], xyz[i, 1], xyz[i, 2] = p.x, p.y, p.z
        out[node_id] = (times, xyz)
    return out


def enu_offsets(trace: MobilityTrace, ref: GeodeticCoord) -> dict[int, list[EnuCoord]]:
    """Rows converted back to local ENU offsets around ref (diagnostics)."""
    return {
        node_id: [ecef_to_enu(geodetic_to_ecef(r.pos), ref) for r in trace.records(node_id)]
        for node_id in trace.node_ids()
    }
