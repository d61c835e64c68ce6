"""CSV and plain-text report emission for benchmark runs.

CSV schema (one row per run):
    protocol,scene,preset,duration_ms,bandwidth_bps,stutter_rate,latency_ms,ssim
"""

from __future__ import annotations

import csv
import io
import os

from .metrics import MetricsReport

CSV_COLUMNS = [
    "protocol",
    "scene",
    "preset",
    "duration_ms",
    "bandwidth_bps",
    "stutter_rate",
    "latency_ms",
    "ssim",
]


def report_rows(reports: list[MetricsReport]) -> list[dict]:
    rows = []
    for r in reports:
        rows.append(
            {
                "protocol": r.protocol,
                "scene": r.scene,
                "preset": r.net_preset,
                "duration_ms": f"{r.duration_ms:.0f}",
                "bandwidth_bps": f"{r.mean_bandwidth_bps:.0f}",
                "stutter_rate": f"{r.stutter_rate:.6f}",
                "latency_ms": "" if r.click_to_photon_ms is None else f"{r.click_to_photon_ms:.2f}",
                "ssim": f"{r.ssim_mean:.6f}",
            }
        )
    return rows


def render_csv(reports: list[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in report_rows(reports):
        writer.writerow(row)
    return buf.getvalue()


def render_table(reports: list[MetricsReport]) -> str:
    """Human-readable comparison grouped like the four evaluation tables."""
    lines = []
    by_key = {}
    for r in reports:
        by_key.setdefault((r.scene, r.net_preset), {})[r.protocol] = r

    def fmt_bw(bps):
        return f"{bps / 1e6:6.2f} mbps" if bps >= 1e6 else f"{bps / 1e3:6.1f} kbps"

    lines.append("scenario                      preset     metric        asp        baseline")
    lines.append("-" * 78)
    for (scene, preset_name), pair in sorted(by_key.items()):
        a, b = pair.get("asp"), pair.get("baseline")

        def col(get, fmt):
            left = fmt(get(a)) if a else "-"
            right = fmt(get(b)) if b else "-"
            return left, right

        bw = col(lambda r: r.mean_bandwidth_bps, fmt_bw)
        st = col(lambda r: r.stutter_rate, lambda v: f"{v * 100:6.2f}%")
        ss = col(lambda r: r.ssim_mean, lambda v: f"{v:6.3f}")
        lines.append(f"{scene:28} {preset_name:10} bandwidth  {bw[0]:>12} {bw[1]:>12}")
        lines.append(f"{'':28} {'':10} stutter    {st[0]:>12} {st[1]:>12}")
        lines.append(f"{'':28} {'':10} ssim       {ss[0]:>12} {ss[1]:>12}")
        lat = col(
            lambda r: r.click_to_photon_ms,
            lambda v: "-" if v is None else f"{v:6.1f}ms",
        )
        if (a and a.click_to_photon_ms is not None) or (b and b.click_to_photon_ms is not None):
            lines.append(f"{'':28} {'':10} latency    {lat[0]:>12} {lat[1]:>12}")
    return "\n".join(lines) + "\n"


def emit_report(reports: list[MetricsReport], out_dir: str) -> tuple[str, str]:
    """Write runs.csv and report.txt under out_dir; returns the two paths."""
    if not reports:
        raise ValueError("no reports to emit")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "runs.csv")
    txt_path = os.path.join(out_dir, "report.txt")
    with open(csv_path, "w") as fh:
        fh.write(render_csv(reports))
    with open(txt_path, "w") as fh:
        fh.write(render_table(reports))
    return csv_path, txt_path
