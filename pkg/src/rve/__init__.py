"""rve: deterministic broadcast CSMA/CA channel emulation for vehicular nodes.

Library layout:

- ``rve.geo``       WGS-84 geodetic / ECEF / ENU conversions
- ``rve.mobility``  NS2 trace parsing, grid/disc mobility, per-node CSV I/O
- ``rve.pktqueue``  the time-sorted packet queue (instrumented binary min-heap)
- ``rve.engine``    the channel engine (collision/backoff/AIFS/post-AIFS rules)
- ``rve.radio``     path loss, RSSI, SINR and capture resolution
- ``rve.telemetry`` windowed CBR/PER metrics, CSV export, event log
- ``rve.plots``     dependency-free SVG time-series rendering
- ``rve.cli``       the ``rve`` command-line front end
"""

from .engine import (
    Branch,
    ChannelContext,
    EmitterOverrunError,
    Engine,
    EngineConfig,
    SimulationResult,
    TransmissionRecord,
    classify,
    compute_aifs,
    handle_aifs_defer,
    handle_backoff,
    handle_collision,
    run_simulation,
)
from .geo import (
    DEFAULT_REFERENCE,
    EcefCoord,
    EnuCoord,
    GeodeticCoord,
    ecef_to_enu,
    ecef_to_geodetic,
    enu_to_ecef,
    geodetic_to_ecef,
)
from .mobility import (
    BsmRecord,
    MobilityTrace,
    TraceError,
    generate_disc_mobility,
    generate_grid_mobility,
    load_trace_dir,
    load_trace_file,
    parse_ns2_trace,
    split_per_node,
    write_trace_file,
)
from .pktqueue import EmptyQueueError, PacketQueue, ScheduledPacket
from .radio import (
    FreeSpace,
    LogDistance,
    RadioParams,
    dbm_to_mw,
    mw_to_dbm,
    path_loss_db,
    resolve_reception,
    rssi_dbm,
    sinr_db,
)
from .telemetry import (
    MetricsAccumulator,
    MetricsWindow,
    RunSummary,
    cbr,
    export_csv,
    parse_metrics_csv,
    render_event_log,
    write_event_log,
)

__version__ = "0.1.0"
