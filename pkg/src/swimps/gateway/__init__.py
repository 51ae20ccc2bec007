from .store import TimelineEntry, TimelineLog
from .service import (
    AlertConfig,
    DeviceRecord,
    GatewayService,
    IngestResult,
    NotificationEvent,
    evaluate_alerts,
)

__all__ = [
    "AlertConfig",
    "DeviceRecord",
    "GatewayService",
    "IngestResult",
    "NotificationEvent",
    "TimelineEntry",
    "TimelineLog",
    "evaluate_alerts",
]
