from io import BytesIO
from typing import Optional, Dict, Any, List
import logging

try:
    from reportlab.lib.pagesizes import A4
    from reportlab.lib.styles import getSampleStyleSheet
    from reportlab.lib import colors
    from reportlab.platypus import SimpleDocTemplate, Paragraph, Spacer, Table, TableStyle
    REPORTLAB_AVAILABLE = True
except Exception:
    REPORTLAB_AVAILABLE = False

from hyperlab.services.utils import _short

LOG = logging.getLogger("hyperlab.report")

MAX_CELL_ROWS = 40


def _table(rows: List[List[str]]):
    table = Table(rows, hAlign='LEFT')
    table.setStyle(TableStyle([
        ('BACKGROUND', (0, 0), (-1, 0), colors.whitesmoke),
        ('BOX', (0, 0), (-1, -1), 0.5, colors.grey),
        ('INNERGRID', (0, 0), (-1, -1), 0.25, colors.lightgrey),
        ('FONTNAME', (0, 0), (-1, -1), 'Helvetica'),
        ('FONTSIZE', (0, 0), (-1, -1), 7),
        ('ALIGN', (0, 0), (0, -1), 'LEFT'),
    ]))
    return table


def generate_pdf_bytes(result: Dict[str, Any]) -> Optional[bytes]:
    """
    Generate a PDF summary from a sanitized ExperimentResult / SelftestReport dict.
    Returns bytes or None if reportlab unavailable.
    """
    if not REPORTLAB_AVAILABLE:
        return None

    buf = BytesIO()
    doc = SimpleDocTemplate(buf, pagesize=A4)
    styles = getSampleStyleSheet()
    story = []

    title = result.get("experiment") or "selftest"
    story.append(Paragraph(f"hyperlab - {title}", styles['Title']))
    story.append(Spacer(1, 12))

    summary_data = [
        ["Config hash", str(result.get("config_hash", "N/A"))],
        ["Base seed", str(result.get("base_seed", "N/A"))],
        ["Samples per cell", str(result.get("samples_per_cell", "N/A"))],
        ["Wall clock (s)", _short(float(result.get("wall_clock", 0.0)))],
        ["Version", str(result.get("version", ""))],
    ]
    story.append(_table(summary_data))
    story.append(Spacer(1, 16))

    cells = result.get("cells") or result.get("checks") or []
    if cells:
        columns = list(cells[0].keys())
        rows = [columns] + [[_short(c.get(k, "")) for k in columns] for c in cells[:MAX_CELL_ROWS]]
        story.append(Paragraph("Cells:", styles['Heading3']))
        story.append(_table(rows))
        story.append(Spacer(1, 12))

    fits = result.get("fits") or {}
    if fits:
        story.append(Paragraph("Fits:", styles['Heading3']))
        for name, fit in fits.items():
            lo, hi = fit.get("slope_ci", [float("nan"), float("nan")])
            story.append(Paragraph(
                f"{name}: slope {fit.get('slope', float('nan')):.4g} (95% CI {lo:.4g} .. {hi:.4g}, {fit.get('points')} points)",
                styles['Normal'],
            ))
        story.append(Spacer(1, 8))

    warnings = result.get("warnings") or []
    if warnings:
        story.append(Paragraph("Warnings:", styles['Heading3']))
        for w in warnings:
            story.append(Paragraph(f"- {w}", styles['Normal']))

    try:
        doc.build(story)
    except Exception as e:
        LOG.error("Failed to build PDF summary: %s", e)
        return None
    buf.seek(0)
    return buf.read()
