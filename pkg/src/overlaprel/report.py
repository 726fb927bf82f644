"""Serialization of analysis results: JSON, CSV, SVG heatmaps, markdown.

Output is deterministic: floats are written with 17 significant digits in
JSON and 3 decimals in CSV display columns, keys keep insertion order, and no
timestamps or absolute paths are recorded.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .outliers import OutlierReport
from .overlap import OverlapMatrix
from .spectral import SummaryResult

__all__ = [
    "dumps",
    "write_json",
    "fmt3",
    "matrix_csv",
    "matrix_to_dict",
    "overlap_payload",
    "summary_to_dict",
    "outlier_payload",
    "outlier_csv",
    "heatmap_svg",
    "markdown_report",
]


def _float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    s = format(x, ".17g")
    if all(ch in "-0123456789" for ch in s):
        s += ".0"
    return s


def _dump(obj, indent: int, level: int, out: list):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        out.append(json.dumps(bool(obj) if obj is not None else None))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad + json.dumps(str(k), ensure_ascii=False) + ": ")
            _dump(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items):
            out.append("[")
            for i, v in enumerate(items):
                _dump(v, indent, level + 1, out)
                if i < len(items) - 1:
                    out.append(", ")
            out.append("]")
            return
        out.append("[\n")
        for i, v in enumerate(items):
            out.append(pad)
            _dump(v, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits."""
    out: list = []
    _dump(obj, indent, 0, out)
    return "".join(out) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def fmt3(x: float) -> str:
    return f"{x:.3f}"


def _csv_field(text: str) -> str:
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def _csv(rows) -> str:
    return "".join(",".join(_csv_field(str(v)) for v in row) + "\n" for row in rows)


# overlap -----------------------------------------------------------------


def matrix_to_dict(matrix: OverlapMatrix) -> dict:
    return {"kind": matrix.kind, "labels": list(matrix.labels), "matrix": matrix.entries.tolist()}


def matrix_csv(matrix: OverlapMatrix) -> str:
    """Labelled CSV of the matrix at display precision (3 decimals)."""
    rows = [[""] + list(matrix.labels)]
    for label, row in zip(matrix.labels, matrix.entries):
        rows.append([label] + [fmt3(v) for v in row])
    return _csv(rows)


def overlap_payload(dice_m: OverlapMatrix, jaccard_m: OverlapMatrix, dims) -> dict:
    pairs = []
    labels = dice_m.labels
    for (j, l), c in sorted((dice_m.counts or {}).items()):
        pairs.append(
            {
                "j": j,
                "l": l,
                "labels": [labels[j], labels[l]],
                "Vj": c.Vj,
                "Vl": c.Vl,
                "Vjl": c.Vjl,
                "dice": float(dice_m.entries[j, l]),
                "jaccard": float(jaccard_m.entries[j, l]),
            }
        )
    return {
        "artifact": "overlap",
        "M": dice_m.M,
        "dims": [dims.nx, dims.ny, dims.nz],
        "labels": list(labels),
        "dice": dice_m.entries.tolist(),
        "jaccard": jaccard_m.entries.tolist(),
        "pairs": pairs,
    }


def summary_to_dict(result: SummaryResult) -> dict:
    return {
        "kind": result.kind,
        "M": result.M,
        "value": result.value,
        "eigenvalues": list(result.spectrum.eigenvalues),
        "sweeps": result.spectrum.sweeps,
        "residual": result.spectrum.residual,
    }


# outliers ----------------------------------------------------------------


def _qkey(q: float) -> str:
    return format(q, "g")


def outlier_payload(report: OutlierReport) -> dict:
    flagged_any = sorted(report.severity)
    records = []
    for r in report.records:
        records.append(
            {
                "j": r.study_index,
                "label": r.label,
                "omega_minus_j": r.omega_minus_j,
                "zeta_minus_j": r.zeta_minus_j,
                "zeta_pairs": list(r.zeta_pairs),
                "zeta_bar": r.zeta_bar,
                "s2": r.s2,
                "s": r.s,
                "tau": r.tau,
                "p_value": r.p_value,
                "flags": {_qkey(q): r.study_index in report.flags[q] for q in report.q_levels},
                "severity": report.severity.get(r.study_index, "none"),
            }
        )
    payload = {
        "artifact": "outliers",
        "kind": report.kind,
        "M": report.M,
        "labels": list(report.labels),
        "q_levels": list(report.q_levels),
        "summary": summary_to_dict(report.full_summary),
        "records": records,
        "flagged": {_qkey(q): [report.labels[j] for j in report.flags[q]] for q in report.q_levels},
        "severity": {report.labels[j]: report.severity[j] for j in flagged_any},
        "s_cv": report.s_coefficient_of_variation,
    }
    if flagged_any and report.M - len(flagged_any) >= 2:
        payload["summary_excluding_flagged"] = summary_to_dict(report.summary_excluding(flagged_any))
    return payload


def outlier_csv(report: OutlierReport) -> str:
    header = ["j", "label", "omega_minus_j", "zeta", "s", "tau", "p_value"]
    header += [f"flag_q{_qkey(q)}" for q in report.q_levels] + ["severity"]
    rows = [header]
    for r in report.records:
        row = [r.study_index, r.label, fmt3(r.omega_minus_j), f"{r.zeta_minus_j:.3e}", f"{r.s:.3e}", fmt3(r.tau)]
        row.append(f"{r.p_value:.3e}")
        row += [int(r.study_index in report.flags[q]) for q in report.q_levels]
        row.append(report.severity.get(r.study_index, "none"))
        rows.append(row)
    return _csv(rows)


# SVG ---------------------------------------------------------------------


def _ramp(v: float) -> str:
    """Linear white (0) to dark blue (1) ramp."""
    v = min(1.0, max(0.0, v))
    lo, hi = (255, 255, 255), (8, 48, 107)
    r, g, b = (round(a + (c - a) * v) for a, c in zip(lo, hi))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(matrix: OverlapMatrix, cell: int = 28) -> str:
    """Lower-triangle heatmap of an overlap matrix as standalone SVG text.

    Colour is a linear ramp over ``[0, 1]`` from white to dark blue; the
    diagonal is omitted since it is 1 by construction.
    """
    M = matrix.M
    margin = 8 * max(len(str(lab)) for lab in matrix.labels) + 10
    legend_w = 40
    width = margin + M * cell + legend_w + 20
    height = margin + M * cell + 10
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
        f"<title>{matrix.kind} overlap, lower triangle</title>",
    ]
    for i, label in enumerate(matrix.labels):
        y = margin + i * cell + cell / 2 + 3
        out.append(f'<text x="{margin - 4}" y="{y:.1f}" text-anchor="end">{label}</text>')
        x = margin + i * cell + cell / 2
        out.append(
            f'<text x="{x:.1f}" y="{margin - 4}" text-anchor="start" '
            f'transform="rotate(-60 {x:.1f} {margin - 4})">{label}</text>'
        )
    for j in range(1, M):
        for l in range(j):
            v = float(matrix.entries[j, l])
            out.append(
                f'<rect x="{margin + l * cell}" y="{margin + j * cell}" width="{cell}" height="{cell}" '
                f'fill="{_ramp(v)}" stroke="#999" stroke-width="0.5"><title>{fmt3(v)}</title></rect>'
            )
    lx = margin + M * cell + 12
    steps = 10
    h = M * cell / steps
    for k in range(steps):
        v = 1.0 - (k + 0.5) / steps
        out.append(f'<rect x="{lx}" y="{margin + k * h:.1f}" width="12" height="{h:.1f}" fill="{_ramp(v)}"/>')
    out.append(f'<text x="{lx + 14}" y="{margin + 8}">1</text>')
    out.append(f'<text x="{lx + 14}" y="{margin + M * cell}">0</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# markdown ----------------------------------------------------------------


def _md_table(header, rows) -> list:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(v) for v in row) + " |" for row in rows]
    return lines


def _md_overlap(d: dict) -> list:
    lines = [f"## Pairwise overlap ({d['M']} studies, grid {'x'.join(map(str, d['dims']))})", ""]
    for kind in ("dice", "jaccard"):
        lines.append(f"**{kind}**")
        lines.append("")
        rows = [[lab] + [fmt3(v) for v in row] for lab, row in zip(d["labels"], d[kind])]
        lines += _md_table([""] + d["labels"], rows)
        lines.append("")
    return lines


def _md_summary(d: dict) -> list:
    lines = ["## Summarized overlap", ""]
    rows = [[s["kind"], s["M"], fmt3(s["value"]), fmt3(s["eigenvalues"][0])] for s in d["summaries"]]
    lines += _md_table(["kind", "M", "summary", "largest eigenvalue"], rows)
    return lines + [""]


def _md_outliers(d: dict, title: str = "Outlier test") -> list:
    s = d["summary"]
    lines = [f"## {title} ({d['kind']}, M={d['M']})", "", f"All-studies summary: {fmt3(s['value'])}", ""]
    qs = [_qkey(q) for q in d["q_levels"]]
    rows = []
    for r in d["records"]:
        rows.append(
            [r["label"], fmt3(r["omega_minus_j"]), f"{r['zeta_minus_j']:.3e}", f"{r['s']:.3e}", fmt3(r["tau"]),
             f"{r['p_value']:.3e}", r["severity"]]
        )
    lines += _md_table(["study", "summary without", "zeta", "s", "tau", "p", "severity"], rows)
    lines.append("")
    for q in qs:
        flagged = d["flagged"][q]
        lines.append(f"- flagged at q={q}: {', '.join(flagged) if flagged else 'none'}")
    if "summary_excluding_flagged" in d:
        lines.append(f"- summary without flagged studies: {fmt3(d['summary_excluding_flagged']['value'])}")
    return lines + [""]


def _md_sweep(d: dict) -> list:
    lines = ["## Threshold sweep", ""]
    for run in d["runs"]:
        lines += _md_outliers(run["report"], title=f"Outlier test at critical value {run['critical']:g}")
    lines.append("### Flags common to every critical value")
    lines.append("")
    for q, labels in d["stable"].items():
        lines.append(f"- q={q}: {', '.join(labels) if labels else 'none'}")
    return lines + [""]


def _md_composite(d: dict) -> list:
    lines = ["## Composite maps", ""]
    lines.append(f"- excluded studies: {', '.join(d['excluded']) if d['excluded'] else 'none'}")
    lines.append(f"- critical value {d['critical']:g} ({d['side']})")
    lines.append(f"- active voxels, all studies: {d['active_all']}")
    lines.append(f"- active voxels, kept studies: {d['active_kept']}")
    lines.append(f"- gained: {d['gained']}, lost: {d['lost']}")
    return lines + [""]


def _md_manifest(d: dict) -> list:
    lines = ["## Simulation", ""]
    cfg = d.get("config") or {}
    for key, value in cfg.items():
        lines.append(f"- {key}: {value}")
    return lines + [""]


_MD = {
    "overlap": _md_overlap,
    "summary": _md_summary,
    "outliers": _md_outliers,
    "sweep": _md_sweep,
    "composite": _md_composite,
    "manifest": _md_manifest,
}


def markdown_report(payloads) -> str:
    """Merge JSON artifacts (already parsed) into one markdown document."""
    lines = ["# Overlap reliability report", ""]
    for d in payloads:
        kind = d.get("artifact")
        if kind not in _MD:
            raise ValueError(f"unknown artifact type {kind!r}")
        lines += _MD[kind](d)
    return "\n".join(lines).rstrip() + "\n"
