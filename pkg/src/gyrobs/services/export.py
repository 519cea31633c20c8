"""Export service: run CSVs, JSON summaries and Jinja2-rendered plot scripts."""

import json
import math
import os
from pathlib import Path
from typing import Any

import numpy as np
import polars as pl
from jinja2 import Environment, FileSystemLoader, select_autoescape

from .. import __version__
from ..models.run import CSV_COLUMNS, MonteCarloSummary, RunRecord

OUT_DIR_ENV = "GYROBS_OUT_DIR"
DEFAULT_OUT_DIR = Path("gyrobs-out")


def resolve_output_dir(flag: str | Path | None, configured: str | Path | None = None) -> Path:
    """``--out`` flag, then ``[output].directory``, then ``$GYROBS_OUT_DIR``, then ``./gyrobs-out``."""
    for candidate in (flag, configured, os.environ.get(OUT_DIR_ENV)):
        if candidate:
            return Path(candidate)
    return DEFAULT_OUT_DIR


def to_jsonable(value: Any) -> Any:
    """Recursively turn numpy values into plain JSON types; NaN/inf become None."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, float | np.floating):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def read_run_csv(path: str | Path) -> pl.DataFrame:
    """Load a run CSV; empty V/V_bound cells come back as null."""
    return pl.read_csv(path, schema={name: pl.Float64 for name in CSV_COLUMNS})


class ExportService:
    """Service for writing run artifacts to an output directory."""

    def __init__(self, templates_dir: Path | None = None):
        """Initialize export service with Jinja2 environment."""
        self.templates_dir = templates_dir or Path(__file__).parent.parent / "templates"
        if not self.templates_dir.exists():
            raise FileNotFoundError(f"Templates directory not found: {self.templates_dir}")

        self.env = Environment(
            loader=FileSystemLoader(str(self.templates_dir)),
            autoescape=select_autoescape(),
            trim_blocks=True,
            lstrip_blocks=True,
        )

    @staticmethod
    def _prepare(path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_run_csv(self, record: RunRecord, path: str | Path) -> Path:
        """Write one row per sample in ``t,e_A_norm,...,V_bound`` order.

        Floats are written in shortest round-trip form; NaN cells are left empty.
        """
        path = self._prepare(path)
        record.to_frame().write_csv(path, line_terminator="\n")
        return path

    def write_montecarlo_csv(self, summary: MonteCarloSummary, path: str | Path) -> Path:
        """Write one row per Monte Carlo trial."""
        path = self._prepare(path)
        summary.to_frame().fill_nan(None).write_csv(path, line_terminator="\n")
        return path

    def write_summary(self, data: dict[str, Any], path: str | Path) -> Path:
        """Write a summary document as sorted, indented JSON."""
        path = self._prepare(path)
        document = {"gyrobs_version": __version__, **data}
        path.write_text(
            json.dumps(to_jsonable(document), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return path

    def export_plot_script(
        self,
        runs: list[dict[str, str]],
        output_path: str | Path,
        title: str,
    ) -> Path:
        """Render a standalone matplotlib script for the given CSV files.

        Args:
            runs: One dict per curve with keys ``label``, ``filename`` (relative
                to the script) and ``attitude_column``
            output_path: Script path
            title: Figure title

        Returns:
            Path to written file

        """
        template = self.env.get_template("plot_run.py.jinja2")
        rendered = template.render(runs=runs, title=title, gyrobs_version=__version__)
        path = self._prepare(output_path)
        path.write_text(rendered, encoding="utf-8")
        return path
