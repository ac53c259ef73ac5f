"""Report rendering: delimited series files plus matplotlib figures.

The training error graph is the platform's central progress display;
`write_training_report` reproduces it as a PNG next to the raw series CSV
so headless runs keep the same artifact.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def write_training_report(result_doc: dict, out_dir: str | Path, stem: str) -> list[Path]:
    """Write <stem>_error_series.csv and <stem>_error_curve.png."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = result_doc.get("error_series", [])

    csv_path = out_dir / f"{stem}_error_series.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "sse"])
        for epoch, sse in enumerate(series, start=1):
            writer.writerow([epoch, repr(float(sse))])

    png_path = out_dir / f"{stem}_error_curve.png"
    fig, ax = plt.subplots(figsize=(7, 4))
    if series:
        ax.plot(range(1, len(series) + 1), series, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("sum of squared errors")
    converged = "converged" if result_doc.get("converged") else "not converged"
    ax.set_title(f"{stem}: {len(series)} epochs, {converged}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]


def write_evaluation_report(result_doc: dict, out_dir: str | Path, stem: str) -> list[Path]:
    """Write <stem>_outputs.csv, plus <stem>_pattern_errors.png when the
    evaluation carried targets."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = result_doc.get("outputs", [])
    errors = result_doc.get("per_pattern_error")

    csv_path = out_dir / f"{stem}_outputs.csv"
    width = len(outputs[0]) if outputs else 0
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["pattern"] + [f"out_{i}" for i in range(width)]
        if errors is not None:
            header.append("error")
        writer.writerow(header)
        for i, row in enumerate(outputs):
            line = [i] + [repr(float(v)) for v in row]
            if errors is not None:
                line.append(repr(float(errors[i])))
            writer.writerow(line)

    written = [csv_path]
    if errors is not None and errors:
        png_path = out_dir / f"{stem}_pattern_errors.png"
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.bar(range(len(errors)), errors)
        ax.set_xlabel("pattern")
        ax.set_ylabel("sum of squared errors")
        ax.set_title(f"{stem}: per-pattern evaluation error")
        ax.grid(True, axis="y", alpha=0.3)
        fig.tight_layout()
        fig.savefig(png_path, dpi=120)
        plt.close(fig)
        written.append(png_path)
    return written
