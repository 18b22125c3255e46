"""Plot-ready table rendering for simulation metrics artifacts.

Tables are rendered from the metrics document written by the simulate
command. Column order is fixed in code and numbers use fixed precision,
so two renders of the same document are byte-identical. The csv format
emits the per-request rows; the table format adds run, summary, stage
breakdown, and profile-usage sections.
"""

from __future__ import annotations

import csv
import io

STAGE_COLUMNS = ("prefill", "compress", "communicate", "decompress", "decode")

REQUEST_COLUMNS = (
    "request_id",
    "workload",
    "arrival",
    "profile_id",
    "reason",
    "explored",
    "recomputed",
    "predicted",
    "prefill",
    "compress",
    "communicate",
    "decompress",
    "decode",
    "ttft",
    "jct",
    "t_slo",
    "violated",
)

SUMMARY_COLUMNS = ("count", "mean_jct", "p50_jct", "p99_jct", "mean_ttft", "violation_rate")

FORMATS = ("table", "csv")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _render_table(columns: tuple[str, ...], rows: list[list[str]]) -> str:
    widths = [len(c) for c in columns]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(columns)).rstrip()]
    for row in rows:
        lines.append("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)


def _request_row(req: dict) -> list[str]:
    stages = req.get("stages", {})
    row = []
    for col in REQUEST_COLUMNS:
        if col in STAGE_COLUMNS:
            row.append(_cell(stages.get(col)))
        else:
            row.append(_cell(req.get(col)))
    return row


def emit_report(doc: dict, fmt: str = "table") -> str:
    """Render a metrics document; see module docstring for the formats."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    requests = list(doc.get("requests", []))

    if fmt == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(REQUEST_COLUMNS)
        for req in requests:
            writer.writerow(_request_row(req))
        return out.getvalue()

    sections = []
    run_bits = []
    for key in ("scenario", "kind", "mode", "seed", "config_digest"):
        if key in doc:
            run_bits.append(f"{key}={doc[key]}")
    if run_bits:
        sections.append("# run " + " ".join(run_bits))

    summary = doc.get("summary", {})
    summary_rows = [[_cell(summary.get(c)) for c in SUMMARY_COLUMNS]] if summary else []
    sections.append("# summary\n" + _render_table(SUMMARY_COLUMNS, summary_rows))

    shares = doc.get("stage_shares", {})
    breakdown_cols = STAGE_COLUMNS + ("total",)
    breakdown_rows = []
    if shares:
        percents = [100.0 * float(shares.get(stage, 0.0)) for stage in STAGE_COLUMNS]
        breakdown_rows = [[f"{p:.2f}" for p in percents] + [f"{sum(percents):.2f}"]]
    sections.append("# stage share (percent of request time)\n" + _render_table(breakdown_cols, breakdown_rows))

    usage: dict[str, int] = {}
    for req in requests:
        pid = str(req.get("profile_id"))
        usage[pid] = usage.get(pid, 0) + 1
    usage_cols = ("profile_id", "requests", "share")
    usage_rows = [
        [pid, str(n), f"{n / len(requests):.4f}"] for pid, n in sorted(usage.items())
    ]
    sections.append("# profile usage\n" + _render_table(usage_cols, usage_rows))

    sections.append("# requests\n" + _render_table(REQUEST_COLUMNS, [_request_row(r) for r in requests]))
    return "\n\n".join(sections) + "\n"
