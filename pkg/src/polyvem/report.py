"""CSV, markdown and SVG output for convergence tables."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .verification import ConvergenceTable

__all__ = ["table_csv", "write_csv", "markdown_summary", "svg_loglog", "csv_name"]

CSV_HEADER = ("h", "dofs", "errH1", "errL2")


def _fmt(x) -> str:
    return "nan" if not math.isfinite(x) else f"{x:.6e}"


def table_csv(table: ConvergenceTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in table.reports:
        writer.writerow([_fmt(r.h), r.dofs, _fmt(r.err_h1), _fmt(r.err_l2)])
    return buf.getvalue()


def csv_name(table: ConvergenceTable) -> str:
    suffix = "_unsplit" if table.label else ""
    return f"{table.case}_{table.family}_lambda{table.lam:g}{suffix}.csv"


def write_csv(table: ConvergenceTable, directory) -> Path:
    path = Path(directory) / csv_name(table)
    path.write_text(table_csv(table))
    return path


def _rate(x) -> str:
    return "n/a" if not math.isfinite(x) else f"{x:.2f}"


def markdown_summary(tables: list[ConvergenceTable]) -> str:
    """One error table per norm: rows are lambda values, columns mesh levels, last column the fitted rate."""
    if not tables:
        return ""
    first = tables[0]
    title = f"{first.case} on {first.family} meshes"
    if first.label:
        title += f" ({first.label})"
    lines = [f"## {title}", ""]
    for norm, attr, rate_attr in (("H1 seminorm", "err_h1", "rate_h1"), ("L2", "err_l2", "rate_l2")):
        hs = [r.h for r in first.reports]
        lines.append(f"### {norm} error")
        lines.append("")
        lines.append("| lambda \\ h | " + " | ".join(_fmt(h) for h in hs) + " | rate |")
        lines.append("|" + "---|" * (len(hs) + 2))
        for t in tables:
            cells = []
            for r in t.reports:
                cells.append("FAILED" if r.failed else f"{getattr(r, attr):.3e}")
            lines.append(f"| {t.lam:g} | " + " | ".join(cells) + f" | {_rate(getattr(t, rate_attr))} |")
        lines.append("")
    dofs = [str(r.dofs) for r in first.reports]
    lines.append("dofs per level: " + ", ".join(dofs))
    failures = [(t.lam, r.message) for t in tables for r in t.reports if r.failed]
    for lam, msg in failures:
        lines.append(f"- lambda {lam:g}: {msg}")
    lines.append("")
    return "\n".join(lines)


def svg_loglog(table: ConvergenceTable, width: int = 480, height: int = 360) -> str:
    """Log-log plot of both error series against h with slope-1 and slope-2 guides."""
    ok = [r for r in table.reports if not r.failed and r.err_h1 > 0 and r.err_l2 > 0]
    margin = 50
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    title = f"{table.case}, lambda = {table.lam:g}"
    parts.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    if len(ok) < 1:
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    h = np.log10([r.h for r in ok])
    e1 = np.log10([r.err_h1 for r in ok])
    e2 = np.log10([r.err_l2 for r in ok])
    # guides anchored at the coarsest point of each series
    g1 = e1[0] + (h - h[0])
    g2 = e2[0] + 2.0 * (h - h[0])
    ys = np.concatenate([e1, e2, g1, g2])
    x_lo, x_hi = h.min(), h.max()
    if x_hi - x_lo < 1e-12:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    y_lo, y_hi = ys.min(), ys.max()
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    def px(xv, yv):
        sx = margin + (xv - x_lo) / (x_hi - x_lo) * (width - 2 * margin)
        sy = height - margin - (yv - y_lo) / (y_hi - y_lo) * (height - 2 * margin)
        return sx, sy

    def polyline(xs, vals, style):
        pts = " ".join("{:.2f},{:.2f}".format(*px(a, b)) for a, b in zip(xs, vals))
        return f'<polyline points="{pts}" fill="none" {style}/>'

    parts.append(
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" height="{height - 2 * margin}" '
        'fill="none" stroke="black"/>'
    )
    parts.append(polyline(h, g1, 'stroke="gray" stroke-dasharray="4,3"'))
    parts.append(polyline(h, g2, 'stroke="gray" stroke-dasharray="1,3"'))
    parts.append(polyline(h, e1, 'stroke="#1f77b4" stroke-width="2"'))
    parts.append(polyline(h, e2, 'stroke="#d62728" stroke-width="2"'))
    for a, b, col in [(x, y, "#1f77b4") for x, y in zip(h, e1)] + [(x, y, "#d62728") for x, y in zip(h, e2)]:
        cx, cy = px(a, b)
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="{col}"/>')
    parts.append(f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">log10 h</text>')
    parts.append(
        f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {height / 2:.1f})">log10 error</text>'
    )
    legend = [
        ("#1f77b4", "", f"H1 seminorm (rate {_rate(table.rate_h1)})"),
        ("#d62728", "", f"L2 (rate {_rate(table.rate_l2)})"),
        ("gray", 'stroke-dasharray="4,3"', "slope 1"),
        ("gray", 'stroke-dasharray="1,3"', "slope 2"),
    ]
    for i, (col, dash, text) in enumerate(legend):
        y = margin + 15 + 15 * i
        parts.append(f'<line x1="{margin + 8}" y1="{y}" x2="{margin + 28}" y2="{y}" stroke="{col}" {dash}/>')
        parts.append(f'<text x="{margin + 34}" y="{y + 4}" font-size="11">{text}</text>')
    for xv, label in ((x_lo, f"{x_lo:.2f}"), (x_hi, f"{x_hi:.2f}")):
        sx, _ = px(xv, y_lo)
        parts.append(f'<text x="{sx:.2f}" y="{height - margin + 14}" text-anchor="middle" font-size="10">{label}</text>')
    for yv, label in ((y_lo, f"{y_lo:.2f}"), (y_hi, f"{y_hi:.2f}")):
        _, sy = px(x_lo, yv)
        parts.append(f'<text x="{margin - 4}" y="{sy + 3:.2f}" text-anchor="end" font-size="10">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
