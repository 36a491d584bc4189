"""
Markdown summary of a reproduction run.
"""

from datetime import datetime, timezone
from typing import Optional

import pandas as pd
from jinja2 import Template

from services.config import TOOL_VERSION

EXACT_TOLERANCE = 1e-3


class ReproductionReport:
    """Renders reproduced cells next to their published values."""

    def __init__(self):
        self.template = Template(
            """
# Reproduction: {{ target }}

**Generated:** {{ generated_at }}
**Tool version:** {{ version }}
**Cells:** {{ total }} ({{ within }} within tolerance{% if missing %}, {{ missing }} without a reference{% endif %})

| Row | Column | Value | Reference | Deviation | Tolerance | Source | OK |
|-----|--------|-------|-----------|-----------|-----------|--------|----|
{% for cell in cells -%}
| {{ cell.row }} | {{ cell.column }} | {{ "%.4f"|format(cell.value) }} | {{ cell.reference_text }} | {{ cell.deviation_text }} | {{ cell.tolerance }} | {{ cell.source }} | {{ cell.status }} |
{% endfor %}
""".strip()
        )

    @staticmethod
    def _within(value: float, reference: float, tolerance: str) -> bool:
        if tolerance == "exact":
            # Published values carry three or four decimals, some truncated.
            return abs(value - reference) <= EXACT_TOLERANCE
        return abs(value - reference) <= float(tolerance)

    def render(self, target: str, frame: pd.DataFrame, generated_at: Optional[str] = None) -> str:
        """
        Render the long-form reproduction table as markdown.

        Args:
            target: Reproduced table or figure name
            frame: Output of TableReproducer.reproduce

        Returns:
            Markdown document
        """
        cells = []
        within = missing = 0
        for record in frame.to_dict(orient="records"):
            reference = record.get("reference")
            if reference is None or pd.isna(reference):
                missing += 1
                reference_text = deviation_text = "n/a"
                status = "-"
            else:
                ok = self._within(record["value"], reference, str(record["tolerance"]))
                within += int(ok)
                reference_text = f"{reference:.4f}"
                deviation_text = f"{record['value'] - reference:+.4f}"
                status = "yes" if ok else "NO"
            cells.append({
                "row": record["row"],
                "column": record["column"],
                "value": record["value"],
                "reference_text": reference_text,
                "deviation_text": deviation_text,
                "tolerance": record["tolerance"],
                "source": record["source"],
                "status": status,
            })

        return self.template.render(
            target=target,
            generated_at=generated_at or datetime.now(timezone.utc).isoformat(timespec="seconds"),
            version=TOOL_VERSION,
            total=len(cells),
            within=within,
            missing=missing,
            cells=cells,
        ) + "\n"


# Global report renderer
reproduction_report = ReproductionReport()
