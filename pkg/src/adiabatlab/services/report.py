"""
Run report: a Markdown summary of a run, also rendered to HTML.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional

import aiofiles
import markdown

logger = logging.getLogger(__name__)


class RunReport:
    """Collects sections and alerts while a command runs."""

    def __init__(self, title: str):
        self.title = title
        self.sections: List[tuple] = []
        self.alerts: List[str] = []

    async def alert(self, kind: str, message: str, severity: str):
        """Alert callback for RunLogger."""
        icon = "🚨" if severity == "critical" else "⚠️"
        self.alerts.append(f"{icon} **{kind}**: {message}")

    def add_section(self, heading: str, body: str):
        self.sections.append((heading, body))

    def add_table(self, heading: str, rows: List[Dict], columns: Optional[List[str]] = None, limit: int = 20):
        """A Markdown table of the first `limit` rows."""
        if not rows:
            self.add_section(heading, "_sin filas_")
            return
        columns = columns or list(rows[0])
        lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
        for row in rows[:limit]:
            cells = []
            for c in columns:
                value = row.get(c, "")
                cells.append(f"{value:.6g}" if isinstance(value, float) else str(value))
            lines.append("| " + " | ".join(cells) + " |")
        if len(rows) > limit:
            lines.append(f"\n_{len(rows) - limit} filas más en el CSV_")
        self.add_section(heading, "\n".join(lines))

    def to_markdown(self) -> str:
        parts = [f"# {self.title}", ""]
        if self.alerts:
            parts += ["## Alertas", ""] + [f"- {a}" for a in self.alerts] + [""]
        for heading, body in self.sections:
            parts += [f"## {heading}", "", body, ""]
        return "\n".join(parts)

    def to_html(self) -> str:
        body = markdown.markdown(self.to_markdown(), extensions=["tables"])
        return f"<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{self.title}</title></head>\n<body>\n{body}\n</body></html>\n"

    async def write(self, out_dir: Path, name: str = "report") -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        async with aiofiles.open(out_dir / f"{name}.md", "w", encoding="utf-8") as f:
            await f.write(self.to_markdown())
        path = out_dir / f"{name}.html"
        async with aiofiles.open(path, "w", encoding="utf-8") as f:
            await f.write(self.to_html())
        logger.info(f"Report written to {path}")
        return path
