"""Render metric reports to disk: JSON + CSV alongside matplotlib figures."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .formats import report_to_csv, report_to_dict, save_json
from .metrics import MetricReport

_UNITS = {"psnr": "dB", "ssim": "", "tsed": "px", "disagreement": "8-bit"}


def _plot_series(ax, name: str, values: list[float]):
    finite = [v if math.isfinite(v) else None for v in values]
    xs = list(range(len(values)))
    ax.plot(xs, [v for v in finite], marker="o", markersize=3, linewidth=1.2)
    unit = _UNITS.get(name, "")
    ax.set_xlabel("frame")
    ax.set_ylabel(f"{name} ({unit})" if unit else name)
    ax.set_title(name)
    ax.grid(True, alpha=0.3)


def write_report(report: MetricReport, out_dir, stem: str = "report") -> list[Path]:
    """Write <stem>.json, <stem>.csv, and one figure per metric series.

    Returns the written paths; the JSON file is the canonical round-trippable
    form, the CSV and PNGs are for humans.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    json_path = out / f"{stem}.json"
    save_json(report_to_dict(report), json_path)
    written.append(json_path)
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(report_to_csv(report))
    written.append(csv_path)
    for name, values in sorted(report.per_frame.items()):
        fig, ax = plt.subplots(figsize=(6, 3.2), dpi=110)
        _plot_series(ax, name, values)
        fig.tight_layout()
        fig_path = out / f"{stem}_{name}.png"
        fig.savefig(fig_path)
        plt.close(fig)
        written.append(fig_path)
    return written


def write_sweep_report(scores: list[tuple[float, float]], best: float, out_dir,
                       stem: str = "scale_sweep") -> list[Path]:
    """Scale-sweep table (JSON + CSV) and the score-vs-scale figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    json_path = out / f"{stem}.json"
    save_json({"best_unit_length": best,
               "scores": [{"unit_length": u, "psnr": s} for u, s in scores]}, json_path)
    written.append(json_path)
    csv_path = out / f"{stem}.csv"
    csv_path.write_text("unit_length,psnr\n" +
                        "".join(f"{u!r},{s!r}\n" for u, s in scores))
    written.append(csv_path)

    fig, ax = plt.subplots(figsize=(6, 3.2), dpi=110)
    xs = [u for u, _ in scores]
    ys = [s for _, s in scores]
    ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2)
    ax.axvline(best, color="tab:red", linestyle="--", linewidth=1.0,
               label=f"best = {best:.3g}")
    ax.set_xlabel("normalization unit length")
    ax.set_ylabel("mean PSNR (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig_path = out / f"{stem}.png"
    fig.savefig(fig_path)
    plt.close(fig)
    written.append(fig_path)
    return written
