"""
Run manifest and stage event log.

Stages publish events (started, completed, artifact written, rows flagged) on a
small event bus. The recorder subscribed to that bus turns the history into
``manifest.json``: the resolved configuration, the seed, package versions, the
ordered stage list and every artifact with its SHA-256 digest. Events are
numbered, not timestamped, so replays produce byte-identical manifests.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

logger = logging.getLogger(__name__)


class RunEventType(Enum):
    """Types of events a pipeline run can emit."""
    STAGE_STARTED = "stage_started"
    STAGE_COMPLETED = "stage_completed"
    ARTIFACT_WRITTEN = "artifact_written"
    ROWS_FLAGGED = "rows_flagged"


@dataclass
class RunEvent:
    """One event of a pipeline run."""
    event_type: RunEventType
    sequence: int
    stage: str
    payload: Dict[str, Any] = field(default_factory=dict)


class RunEventBus:
    """Simple event bus for stage events."""

    def __init__(self):
        self.event_history: List[RunEvent] = []
        self.subscribers: Dict[RunEventType, List[Callable[[RunEvent], None]]] = {}
        self.metrics = {"total_events": 0, "events_by_type": {}}

    def subscribe(self, event_type: RunEventType, callback: Callable[[RunEvent], None]) -> None:
        """Subscribe to a specific event type."""
        self.subscribers.setdefault(event_type, []).append(callback)

    def publish(self, event_type: RunEventType, stage: str, **payload: Any) -> RunEvent:
        """Publish an event to all subscribers."""
        event = RunEvent(event_type=event_type, sequence=len(self.event_history), stage=stage, payload=payload)
        self.event_history.append(event)

        self.metrics["total_events"] += 1
        by_type = self.metrics["events_by_type"]
        by_type[event_type.value] = by_type.get(event_type.value, 0) + 1

        for callback in self.subscribers.get(event_type, []):
            callback(event)
        return event

    def get_events(self, event_type: Optional[RunEventType] = None, limit: Optional[int] = None) -> List[RunEvent]:
        """Get events, optionally filtered by type and limited in count."""
        events = self.event_history
        if event_type:
            events = [e for e in events if e.event_type == event_type]
        if limit:
            events = events[-limit:]
        return events

    def get_metrics(self) -> Dict[str, Any]:
        """Get event bus metrics."""
        return {"total_events": self.metrics["total_events"], "events_by_type": dict(self.metrics["events_by_type"])}


def file_digest(path: Path) -> str:
    """SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def package_versions() -> Dict[str, str]:
    """Versions of the numerical stack that determine results."""
    import joblib
    import numpy
    import pandas
    import scipy

    from . import __version__

    return {
        "brainz_bp": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "pandas": pandas.__version__,
        "joblib": joblib.__version__,
    }


class RunRecorder:
    """Collects stage events of one CLI run and writes the manifest."""

    def __init__(self, command: str, config_dict: Dict[str, Any], root: Optional[Path] = None):
        self.command = command
        self.config_dict = config_dict
        self.root = Path(root) if root is not None else None
        self.bus = RunEventBus()
        self.stages: List[Dict[str, Any]] = []
        self.artifacts: List[Dict[str, Any]] = []
        self.flagged: List[Dict[str, Any]] = []
        self.bus.subscribe(RunEventType.STAGE_COMPLETED, self._on_stage_completed)
        self.bus.subscribe(RunEventType.ARTIFACT_WRITTEN, self._on_artifact)
        self.bus.subscribe(RunEventType.ROWS_FLAGGED, self._on_flagged)

    def stage_started(self, stage: str, **payload: Any) -> None:
        logger.info("--- Stage: %s ---", stage)
        self.bus.publish(RunEventType.STAGE_STARTED, stage, **payload)

    def stage_completed(self, stage: str, **payload: Any) -> None:
        self.bus.publish(RunEventType.STAGE_COMPLETED, stage, **payload)

    def artifact(self, stage: str, path: Path, kind: str) -> Path:
        self.bus.publish(RunEventType.ARTIFACT_WRITTEN, stage, path=Path(path), kind=kind)
        return Path(path)

    def rows_flagged(self, stage: str, count: int, reasons: Dict[str, int]) -> None:
        if count:
            logger.warning("%s flagged %d rows: %s", stage, count, reasons)
        self.bus.publish(RunEventType.ROWS_FLAGGED, stage, count=count, reasons=dict(sorted(reasons.items())))

    def _on_stage_completed(self, event: RunEvent) -> None:
        self.stages.append({"sequence": event.sequence, "stage": event.stage, **_jsonable(event.payload)})

    def _on_artifact(self, event: RunEvent) -> None:
        path = Path(event.payload["path"])
        shown = path.relative_to(self.root).as_posix() if self.root and path.is_relative_to(self.root) else path.as_posix()
        self.artifacts.append({
            "stage": event.stage,
            "kind": event.payload["kind"],
            "path": shown,
            "sha256": file_digest(path),
        })

    def _on_flagged(self, event: RunEvent) -> None:
        self.flagged.append({"stage": event.stage, **_jsonable(event.payload)})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config_dict,
            "seed": self.config_dict["sections"]["runtime"]["seed"],
            "versions": package_versions(),
            "stages": self.stages,
            "flagged": self.flagged,
            "artifacts": self.artifacts,
            "event_metrics": self.bus.get_metrics(),
        }

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info("Manifest written to %s", path)
        return path


def load_manifest(path: Path) -> Dict[str, Any]:
    """Read a manifest written by :class:`RunRecorder`."""
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _jsonable(payload: Dict[str, Any]) -> Dict[str, Any]:
    out = {}
    for key, value in payload.items():
        if isinstance(value, Path):
            value = value.as_posix()
        elif isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out
