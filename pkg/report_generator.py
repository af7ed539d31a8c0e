"""Module for generating key-value and HTML run reports."""

import logging
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from jinja2 import Template

from utils.file_manager import RunFileManager

logger = logging.getLogger(__name__)

KV_TEMPLATE = Template(
    "# {{ title }}\n"
    "generated = {{ generated }}\n"
    "{% for key, value in values %}{{ key }} = {{ value }}\n{% endfor %}"
    "{% for table in tables %}\n[{{ table.name }}]\n{{ table.columns | join('\t') }}\n"
    "{% for row in table.rows %}{{ row | join('\t') }}\n{% endfor %}{% endfor %}"
)

HTML_TEMPLATE = Template('''<!DOCTYPE html>
<html lang="en">
<head>
    <meta charset="UTF-8">
    <title>QBERT {{ title }}</title>
    <style>
        body { font-family: Arial, sans-serif; line-height: 1.6; margin: 2em; }
        table { border-collapse: collapse; margin-bottom: 1.5em; }
        th, td { border: 1px solid #ccc; padding: 4px 10px; text-align: right; }
        th { background: #f0f0f0; }
        .fail { color: #b00020; font-weight: bold; }
    </style>
</head>
<body>
    <h1>{{ title }}</h1>
    <p>Generated {{ generated }}</p>
    <table>
    {% for key, value in values %}<tr><th>{{ key }}</th><td>{{ value }}</td></tr>
    {% endfor %}</table>
    {% for table in tables %}<h2>{{ table.name }}</h2>
    <table>
        <tr>{% for c in table.columns %}<th>{{ c }}</th>{% endfor %}</tr>
        {% for row in table.rows %}<tr{% if table.flag is not none and not row[table.flag] %} class="fail"{% endif %}>{% for v in row %}<td>{{ v }}</td>{% endfor %}</tr>
        {% endfor %}
    </table>
    {% endfor %}
</body>
</html>
''')


def format_report_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.6g}"
    return str(value)


class ReportGenerator:
    """Renders run summaries as ``key = value`` text (and optionally HTML) into the run directory."""

    def __init__(self, file_manager: RunFileManager):
        self.file_manager = file_manager

    def _context(self, title: str, values: Dict[str, Any], tables: Optional[Sequence[Dict[str, Any]]]) -> Dict:
        rendered_tables: List[Dict[str, Any]] = []
        for table in tables or []:
            rendered_tables.append({
                "name": table["name"],
                "columns": list(table["columns"]),
                "rows": [[format_report_value(v) for v in row] for row in table["rows"]],
                "flag": table.get("flag"),
            })
        return {
            "title": title,
            "generated": datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
            "values": [(k, format_report_value(v)) for k, v in values.items()],
            "tables": rendered_tables,
        }

    def render(self, title: str, values: Dict[str, Any], tables: Optional[Sequence[Dict[str, Any]]] = None) -> str:
        return KV_TEMPLATE.render(**self._context(title, values, tables))

    def save(self, kind: str, title: str, values: Dict[str, Any],
             tables: Optional[Sequence[Dict[str, Any]]] = None, html: bool = False) -> Path:
        """Write the text report (and an HTML twin when ``html``); returns the text path."""
        report_path = self.file_manager.generate_filename(kind, "txt")
        with open(report_path, "w", encoding="utf-8") as f:
            f.write(self.render(title, values, tables))
        logger.info(f"Report saved to {report_path}")
        if html:
            html_path = report_path.with_suffix(".html")
            context = self._context(title, values, tables)
            for table in context["tables"]:
                if table["flag"] is not None:
                    # flag column holds "true"/"false" after formatting
                    table["rows"] = [row[:table["flag"]] + [row[table["flag"]] == "true"] + row[table["flag"] + 1:]
                                     for row in table["rows"]]
            with open(html_path, "w", encoding="utf-8") as f:
                f.write(HTML_TEMPLATE.render(**context))
            logger.info(f"HTML report saved to {html_path}")
        return report_path
