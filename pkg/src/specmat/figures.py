"""Dependency-free SVG figures plus the CSVs they are drawn from."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from specmat.evaluation import MATERIALS, ConfusionMatrix, SpectrumSummary

WIDTH, HEIGHT = 640, 400
MARGIN = 60


def _svg(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body,
                      "</svg>"]) + "\n"


def _pts(xs: np.ndarray, ys: np.ndarray) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))


class _Axes:
    """Linear map from data coordinates to the plot rectangle."""

    def __init__(self, xlim, ylim, width=WIDTH, height=HEIGHT, margin=MARGIN):
        self.x0, self.x1 = map(float, xlim)
        self.y0, self.y1 = map(float, ylim)
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.left, self.right = margin, width - margin / 2
        self.top, self.bottom = margin / 2, height - margin

    def x(self, v):
        v = np.asarray(v, dtype=float)
        return self.left + (v - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def y(self, v):
        v = np.asarray(v, dtype=float)
        return self.bottom - (v - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def frame(self, xlabel: str, ylabel: str, title: str, xticks=(), yticks=()) -> list[str]:
        out = [f'<rect x="{self.left}" y="{self.top}" width="{self.right - self.left}" '
               f'height="{self.bottom - self.top}" fill="none" stroke="black"/>',
               f'<text x="{(self.left + self.right) / 2}" y="{self.top - 8}" '
               f'text-anchor="middle">{escape(title)}</text>',
               f'<text x="{(self.left + self.right) / 2}" y="{self.bottom + 40}" '
               f'text-anchor="middle">{escape(xlabel)}</text>',
               f'<text x="15" y="{(self.top + self.bottom) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {(self.top + self.bottom) / 2})">{escape(ylabel)}</text>']
        for v, label in xticks:
            out.append(f'<text x="{float(self.x(v)):.2f}" y="{self.bottom + 18}" '
                       f'text-anchor="middle">{escape(label)}</text>')
        for v, label in yticks:
            out.append(f'<text x="{self.left - 6}" y="{float(self.y(v)) + 4:.2f}" '
                       f'text-anchor="end">{escape(label)}</text>')
        return out


def spectrum_svg(summary: SpectrumSummary) -> str:
    """Mean curve with a shaded one-SD band."""
    w, mean, sd = summary.wavelengths, summary.mean, summary.sd
    lo, hi = mean - sd, mean + sd
    ax = _Axes((w[0], w[-1]), (min(0.0, lo.min()), max(1.0, hi.max())))
    band = np.concatenate([ax.x(w), ax.x(w[::-1])]), np.concatenate([ax.y(hi), ax.y(lo[::-1])])
    ticks = [(v, f"{v:.0f}") for v in np.linspace(w[0], w[-1], 5)]
    body = ax.frame("wavelength (nm)", "normalized intensity",
                    f"{summary.object_id} (mean SD {summary.mean_sd:.4f})", ticks,
                    [(v, f"{v:.1f}") for v in (0.0, 0.5, 1.0)])
    body.append(f'<polygon class="band" points="{_pts(*band)}" fill="#1f77b4" '
                'fill-opacity="0.3" stroke="none"/>')
    body.append(f'<polyline class="mean" points="{_pts(ax.x(w), ax.y(mean))}" fill="none" '
                'stroke="#1f77b4" stroke-width="1.5"/>')
    return _svg(WIDTH, HEIGHT, body)


def row_percentages(cm: ConfusionMatrix) -> np.ndarray:
    totals = cm.row_totals[:, None].astype(float)
    return np.divide(100.0 * cm.counts, totals, out=np.zeros(cm.counts.shape), where=totals > 0)


def confusion_svg(cm: ConfusionMatrix, title: str = "confusion") -> str:
    """Heatmap shaded by row share with the percentage printed in every cell."""
    pct = row_percentages(cm)
    cell, left, top = 60, 140, 60
    rows = len(cm.row_labels)
    width = left + cell * len(MATERIALS) + 20
    height = top + cell * rows + 20
    body = [f'<text x="{width / 2}" y="20" text-anchor="middle">{escape(title)}</text>']
    for j, m in enumerate(MATERIALS):
        body.append(f'<text x="{left + cell * j + cell / 2}" y="{top - 8}" '
                    f'text-anchor="middle">{m}</text>')
    for i, label in enumerate(cm.row_labels):
        y = top + cell * i
        body.append(f'<text x="{left - 8}" y="{y + cell / 2 + 4}" '
                    f'text-anchor="end">{escape(label)}</text>')
        for j in range(len(MATERIALS)):
            share = pct[i, j] / 100.0
            shade = int(round(255 * (1.0 - share)))
            ink = "white" if share > 0.5 else "black"
            body.append(f'<rect class="cell" x="{left + cell * j}" y="{y}" width="{cell}" '
                        f'height="{cell}" fill="rgb({shade},{shade},255)" stroke="#888"/>')
            body.append(f'<text class="pct" x="{left + cell * j + cell / 2}" '
                        f'y="{y + cell / 2 + 4}" text-anchor="middle" '
                        f'fill="{ink}">{pct[i, j]:.1f}</text>')
    return _svg(width, height, body)


def _sweep_x(points: Sequence[tuple[int | str, float]]) -> list[float]:
    numeric = [n for n, _ in points if not isinstance(n, str)]
    last = max(numeric, default=0)
    xs = []
    for n, _ in points:
        if isinstance(n, str):
            last += 1
            xs.append(float(last))
        else:
            xs.append(float(n))
    return xs


def sweep_svg(points: Sequence[tuple[int | str, float]], title: str = "object-count sweep") -> str:
    """Accuracy against training objects per material, one vertex per point in order.

    A non-numeric n such as ``"all"`` is placed one step right of the largest n.
    """
    if not points:
        raise ValueError("no sweep points")
    xs = _sweep_x(points)
    accs = [a for _, a in points]
    ax = _Axes((min(xs), max(xs)), (0.0, 1.0))
    ticks = [(x, str(n)) for x, (n, _) in zip(xs, points)]
    body = ax.frame("training objects per material", "accuracy", title, ticks,
                    [(v, f"{v:.1f}") for v in (0.0, 0.5, 1.0)])
    body.append(f'<polyline class="sweep" points="{_pts(ax.x(xs), ax.y(accs))}" fill="none" '
                'stroke="#d62728" stroke-width="1.5"/>')
    for x, a in zip(ax.x(xs), ax.y(accs)):
        body.append(f'<circle cx="{x:.2f}" cy="{a:.2f}" r="3" fill="#d62728"/>')
    return _svg(WIDTH, HEIGHT, body)


def _writer(path: Path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def write_spectrum_figure(summary: SpectrumSummary, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    svg = out / f"spectrum_{summary.object_id}.svg"
    svg.write_text(spectrum_svg(summary), encoding="utf-8")
    table = out / f"spectrum_{summary.object_id}.csv"
    fh, w = _writer(table)
    with fh:
        w.writerow(["wavelength", "mean", "sd"])
        for row in zip(summary.wavelengths, summary.mean, summary.sd):
            w.writerow([f"{v:.9g}" for v in row])
    return [svg, table]


def write_confusion_figure(cm: ConfusionMatrix, out_dir: str | Path, name: str,
                           title: str = "confusion") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    svg = out / f"{name}.svg"
    svg.write_text(confusion_svg(cm, title), encoding="utf-8")
    table = out / f"{name}_percent.csv"
    fh, w = _writer(table)
    with fh:
        w.writerow(["row", *MATERIALS])
        for label, row in zip(cm.row_labels, row_percentages(cm)):
            w.writerow([label, *(f"{v:.6g}" for v in row)])
    return [svg, table]


def write_sweep_figure(points: Sequence[tuple[int | str, float]], out_dir: str | Path,
                       title: str = "object-count sweep") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    svg = out / "sweep.svg"
    svg.write_text(sweep_svg(points, title), encoding="utf-8")
    table = out / "sweep.csv"
    fh, w = _writer(table)
    with fh:
        w.writerow(["n", "accuracy"])
        for n, a in points:
            w.writerow([n, f"{a:.9g}"])
    return [svg, table]
