"""
Markdown evaluation summaries rendered from Jinja2 templates.
"""

from pathlib import Path
from typing import List, Optional, Sequence
import logging

from jinja2 import Environment, FileSystemLoader, select_autoescape
from pydantic import BaseModel, Field

from spectrum_guard.models import EvalReport

logger = logging.getLogger(__name__)

DEFAULT_TEMPLATES_DIR = Path(__file__).parent.parent / "report_templates"


class SummaryContext(BaseModel):
    """Variables of the evaluation summary template."""

    title: str = Field(default="Evaluation summary")
    dataset: Optional[str] = Field(default=None)
    threshold_px: float = Field(description="Matching eligibility threshold")
    pixel_size: float = Field(description="Meters per pixel")
    reports: List[EvalReport] = Field(default_factory=list)


class ReportFormatter:
    """Renders evaluation reports as Markdown."""

    def __init__(self, templates_dir: Optional[Path] = None):
        self.templates_dir = Path(templates_dir or DEFAULT_TEMPLATES_DIR)
        self.env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)),
            autoescape=select_autoescape(['html', 'xml']),
            trim_blocks=True,
            lstrip_blocks=True
        )
        self.env.filters['fmt'] = self._fmt
        self.env.filters['percent'] = self._percent

    @staticmethod
    def _fmt(value: Optional[float], digits: int = 3) -> str:
        return "n/a" if value is None else f"{value:.{digits}f}"

    @staticmethod
    def _percent(value: Optional[float]) -> str:
        return "n/a" if value is None else f"{100.0 * value:.2f}%"

    def render_summary(self, context: SummaryContext) -> str:
        template = self.env.get_template('eval_summary.md.j2')
        return template.render(**context.model_dump(exclude={'reports'}), reports=context.reports)

    def save_summary(self, context: SummaryContext, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render_summary(context), encoding='utf-8')
        logger.info(f"Saved evaluation summary to {path}")
        return path
