"""
Run logging module.
Keeps the events of an experiment run and forwards alerts to the report.
"""

import logging
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

SEVERITIES = ("info", "warning", "critical")


class RunLogger:
    """Logs experiment events (gap checks, bound checks, slope fits)."""

    def __init__(self, alert_callback=None):
        """
        Initialize the run logger.

        Args:
            alert_callback: Async function called with (kind, message, severity)
                for warning and critical events
        """
        self.alert_callback = alert_callback
        self.history: Dict[str, List[Dict[str, Any]]] = {}

    async def log_event(self, kind: str, message: str, severity: str = "info", **details):
        """
        Record an event and log it.

        Args:
            kind: event family ("gap", "bound", "slope", ...)
            message: human readable description
            severity: "info", "warning" or "critical"
        """
        if severity not in SEVERITIES:
            raise ValueError(f"severity must be one of {SEVERITIES}, got {severity!r}")
        record = {"kind": kind, "message": message, "severity": severity, **details}
        self.history.setdefault(kind, []).append(record)

        if severity == "critical":
            logger.error(f"🚨 [{kind}] {message}")
        elif severity == "warning":
            logger.warning(f"⚠️ [{kind}] {message}")
        else:
            logger.info(f"[{kind}] {message}")

        if self.alert_callback and severity != "info":
            try:
                await self.alert_callback(kind, message, severity)
            except Exception as e:
                logger.error(f"Error in alert callback: {e}")

    async def log_bound(self, name: str, value: float, bound: float):
        """Record a measured value against its bound."""
        holds = value <= bound
        severity = "info" if holds else "critical"
        await self.log_event("bound", f"{name}: {value:.3e} {'≤' if holds else '>'} {bound:.3e}", severity, value=value, bound=bound)
        return holds

    async def log_slope(self, name: str, slope: float, threshold: Optional[float] = None):
        """Record a fitted log-log slope; below the threshold it is a warning."""
        ok = threshold is None or slope >= threshold
        text = f"{name}: slope {slope:.3f}" + ("" if threshold is None else f" (threshold {threshold:.2f})")
        await self.log_event("slope", text, "info" if ok else "warning", slope=slope, threshold=threshold)
        return ok

    def events(self, kind: Optional[str] = None) -> List[Dict[str, Any]]:
        if kind is not None:
            return list(self.history.get(kind, []))
        return [record for records in self.history.values() for record in records]

    def alerts(self) -> List[Dict[str, Any]]:
        return [record for record in self.events() if record["severity"] != "info"]
