"""Interactive faceted exploration of tabular data.

Load a CSV or JSON file, partition facets into bins/categories/intervals,
aggregate per group, and link multiple filters so a selection in one narrows
all the others (crossfilter semantics).  Works headless through the CLI,
embedded through this API, or served over HTTP/WebSocket for the dashboard.
"""

from .errors import (
    BackendError,
    Conflict,
    EncodingError,
    IncompatibleDatasets,
    InvalidSelection,
    InvalidSpec,
    KindMismatch,
    LimitExceeded,
    MalformedInput,
    MalformedRow,
    NotFound,
    ParseError,
    SessionStateError,
    SpotError,
    UnsupportedStructure,
    UnsupportedVersion,
    ValidationError,
)
from .model import (
    MISSING,
    Dataset,
    DatasetInfo,
    Facet,
    FacetStats,
    combine_datasets,
    facet_stats,
)
from .ingest import (
    DetectionConfig,
    detect_facet_kinds,
    load_dataset,
    load_file,
    parse_csv,
    parse_json_records,
    serialize_csv,
)
from .engine import (
    AggregateSpec,
    BinKey,
    CategoryList,
    CategorySelection,
    ContinuousBins,
    GroupRow,
    InMemoryBackend,
    PartitionSpec,
    RangeSelection,
    TimeInterval,
    aggregate,
    default_partition,
    partition_key,
    scan_stats,
)
from .dataview import Backend, DataView, Filter, UpdateEvent
from .session import (
    ChartState,
    FrozenView,
    Session,
    load_session,
    restore,
    save_session,
)

__version__ = "0.1.0"

__all__ = [
    "MISSING",
    "AggregateSpec",
    "Backend",
    "BackendError",
    "BinKey",
    "CategoryList",
    "CategorySelection",
    "ChartState",
    "Conflict",
    "ContinuousBins",
    "Dataset",
    "DatasetInfo",
    "DataView",
    "DetectionConfig",
    "EncodingError",
    "Facet",
    "FacetStats",
    "Filter",
    "FrozenView",
    "GroupRow",
    "InMemoryBackend",
    "IncompatibleDatasets",
    "InvalidSelection",
    "InvalidSpec",
    "KindMismatch",
    "LimitExceeded",
    "MalformedInput",
    "MalformedRow",
    "NotFound",
    "ParseError",
    "PartitionSpec",
    "RangeSelection",
    "Session",
    "SessionStateError",
    "SpotError",
    "TimeInterval",
    "UnsupportedStructure",
    "UnsupportedVersion",
    "UpdateEvent",
    "ValidationError",
    "aggregate",
    "combine_datasets",
    "default_partition",
    "detect_facet_kinds",
    "facet_stats",
    "load_dataset",
    "load_file",
    "load_session",
    "parse_csv",
    "parse_json_records",
    "partition_key",
    "restore",
    "save_session",
    "scan_stats",
    "serialize_csv",
]
