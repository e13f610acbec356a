"""Channel metrics (windowed CBR/PER, run summary) and the human-readable event log.

Windows tile the configured run duration exactly (ceil(duration/window_len)
of them); a shorter final window is flagged partial. Records are accounted
as they are emitted: busy time is apportioned across the windows a record
overlaps, clipped to the run duration, while packet and error counts land
in the window containing the record start. Flush-tail records that start
past the duration keep their counts in the final window so the window
stream and the raw record stream always agree on totals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

DEFAULT_WINDOW_NS = 100_000_000     # 100 ms


@dataclass(slots=True)
class MetricsWindow:
    """One telemetry window: occupancy and packet outcomes."""

    window_start: int           # ticks (ns)
    window_len: int             # ticks (ns)
    busy: int = 0               # ticks of channel occupancy
    tx_count: int = 0
    error_count: int = 0
    partial: bool = False

    @property
    def cbr(self) -> float:
        return self.busy / self.window_len

    @property
    def per(self) -> float:
        return self.error_count / self.tx_count if self.tx_count else 0.0


def cbr(w: MetricsWindow) -> float:
    """Channel busy ratio of a window: occupied time over window length."""
    return w.cbr


@dataclass(frozen=True, slots=True)
class RunSummary:
    """Aggregate metrics for one simulation run."""

    mean_cbr: float
    mean_per: float
    tx_packets: int
    error_packets: int
    success_packets: int
    records: int
    damaged_records: int
    capture_wins: int
    distance_clamps: int
    duration_s: float           # configured channel time
    lapsed_s: float             # actual channel time incl. the flush tail
    wall_clock_s: float


class MetricsAccumulator:
    """Streams TransmissionRecord-level facts into windows and totals."""

    def __init__(self, duration: int, window_len: int = DEFAULT_WINDOW_NS):
        if duration <= 0 or window_len <= 0:
            raise ValueError("duration and window length must be positive")
        self.duration = duration
        self.window_len = window_len
        n = -(-duration // window_len)
        self.windows = [
            MetricsWindow(i * window_len, min(window_len, duration - i * window_len))
            for i in range(n)
        ]
        if self.windows[-1].window_len != window_len:
            self.windows[-1].partial = True
        self._last_start = -1
        self.tx_packets = 0
        self.error_packets = 0
        self.success_packets = 0
        self.records = 0
        self.damaged_records = 0
        self.capture_wins = 0
        self.distance_clamps = 0
        self.total_busy = 0      # unclipped, for cumulative log lines

    def record_transmission(self, start: int, duration: int, packets: int, errors: int,
                            damaged: bool, captured: bool) -> None:
        if start < self._last_start:
            raise AssertionError("records must arrive in start order")
        self._last_start = start

        end = start + duration
        lo = max(start, 0)
        hi = min(end, self.duration)
        if hi > lo:
            w = self.window_len
            for i in range(lo // w, (hi - 1) // w + 1):
                win = self.windows[i]
                win.busy += min(hi, win.window_start + win.window_len) - max(lo, win.window_start)
        wi = min(start // self.window_len, len(self.windows) - 1)
        win = self.windows[wi]
        win.tx_count += packets
        win.error_count += errors

        self.tx_packets += packets
        self.error_packets += errors
        self.success_packets += packets - errors
        self.records += 1
        self.damaged_records += 1 if damaged else 0
        self.capture_wins += 1 if captured else 0
        self.total_busy += duration

    def mean_cbr(self) -> float:
        total_len = sum(w.window_len for w in self.windows)
        return sum(w.busy for w in self.windows) / total_len

    def mean_per(self) -> float:
        return self.error_packets / self.tx_packets if self.tx_packets else 0.0

    def last_complete_window(self, now: int) -> MetricsWindow | None:
        """Most recent window fully elapsed at virtual time `now`."""
        i = min(now // self.window_len, len(self.windows)) - 1
        return self.windows[i] if i >= 0 else None

    def summary(self, lapsed: int, wall_clock_s: float) -> RunSummary:
        return RunSummary(
            mean_cbr=self.mean_cbr(),
            mean_per=self.mean_per(),
            tx_packets=self.tx_packets,
            error_packets=self.error_packets,
            success_packets=self.success_packets,
            records=self.records,
            damaged_records=self.damaged_records,
            capture_wins=self.capture_wins,
            distance_clamps=self.distance_clamps,
            duration_s=self.duration / 1e9,
            lapsed_s=lapsed / 1e9,
            wall_clock_s=wall_clock_s,
        )


def export_csv(windows: Iterable[MetricsWindow], summary: RunSummary, path: str | Path) -> Path:
    """Write the window time series plus a summary footer.

    Header is exactly ``t_ms,cbr,per``; one row per window; footer lines are
    ``# key,value`` comments.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    windows = list(windows)
    lines = ["t_ms,cbr,per"]
    for w in windows:
        lines.append(f"{w.window_start // 1_000_000},{w.cbr!r},{w.per!r}")
    lines += [
        f"# windows,{len(windows)}",
        f"# mean_cbr,{summary.mean_cbr!r}",
        f"# mean_per,{summary.mean_per!r}",
        f"# tx,{summary.tx_packets}",
        f"# errors,{summary.error_packets}",
        f"# records,{summary.records}",
        f"# damaged,{summary.damaged_records}",
        f"# capture_wins,{summary.capture_wins}",
        f"# duration_s,{summary.duration_s!r}",
        f"# lapsed_s,{summary.lapsed_s!r}",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class MetricsCsvError(ValueError):
    """Malformed telemetry CSV (includes the offending row number)."""


def parse_metrics_csv(path: str | Path) -> tuple[list[tuple[int, float, float]], dict[str, str]]:
    """Read back an export_csv file: (rows, footer); rows are (t_ms, cbr, per)."""
    rows: list[tuple[int, float, float]] = []
    footer: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if lineno == 1:
                if line != "t_ms,cbr,per":
                    raise MetricsCsvError(f"row 1: bad header {line!r}")
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(",")
                footer[key] = value
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise MetricsCsvError(f"row {lineno}: expected 3 fields")
            try:
                rows.append((int(parts[0]), float(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise MetricsCsvError(f"row {lineno}: {exc}") from None
    return rows, footer


# --- Event log ---------------------------------------------------------------
#
# The engine collects structured entries when logging is enabled; rendering
# turns them into the per-cycle text blocks: a pending-queue snapshot as
# `<node: time>` pairs before every decision, the decision line, and a status
# block per transmitted record. The CBP line reports the most recently
# completed 100 ms window (0 before the first one completes) and the success
# rate is cumulative over the records before the current one.

def _fmt_us(ns: int | float) -> str:
    return f"{ns / 1000:g}"


def _fmt_buffer(snapshot: list[tuple[int, int]]) -> str:
    return "Current TX Buffer " + " ".join(f"<{nid}: {t / 1e9:.6f}>" for nid, t in snapshot)


def render_event_log(entries: Iterable[tuple]) -> str:
    out: list[str] = []
    for e in entries:
        kind = e[0]
        if kind == "header":
            out.append("CSMA/CA broadcast channel emulator")
            out.append(f"(info) {e[1]} node traces loaded.")
            out.append("")
        elif kind == "buffer":
            out.append("*****")
            out.append(_fmt_buffer(e[1]))
        elif kind == "collision":
            out.append(f"-> Collision Occurred at {_fmt_us(e[2])} us")
            out.append("Current Queue")
        elif kind == "backoff":
            out.append(f"-> Transmission in progress, Back-off with random {e[2]}")
            out.append("Back-off")
        elif kind == "defer":
            out.append("-> Arrived in AIFS interval, rescheduled")
            out.append("AIFS")
        elif kind == "status":
            _, damaged, node_id, dur_ns, cbp_pct, success_pct, lapsed_ns = e
            if damaged:
                out.append("Damage Transmission")
                out.append(f"(info) Transmitted Damaged Packet from Node: {node_id}")
            else:
                out.append("Success Transmission")
                out.append(f"(info) Successfully Transmitted Packet from Node: {node_id}")
            out.append(f"(info) Current Transmission Time: {_fmt_us(dur_ns)} us")
            out.append(f"(info) CBP: {cbp_pct:.4g} %")
            out.append(f"(info) Success Rate: {success_pct:.4g} %")
            out.append(f"(info) Total Time Lapsed: {_fmt_us(lapsed_ns)}")
        else:
            raise ValueError(f"unknown log entry kind {kind!r}")
    return "\n".join(out) + "\n"


def write_event_log(sink: str | Path | IO[str], entries: Iterable[tuple]) -> None:
    """Render entries to a path or text stream."""
    text = render_event_log(entries)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        Path(sink).write_text(text, encoding="utf-8")
