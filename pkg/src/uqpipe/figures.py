"""Report figures rendered to files.

All plots draw on the non-interactive Agg backend and are written as
PNG with the software tag stripped, so rerunning a pipeline with the
same inputs reproduces the files byte for byte.  Every function takes
the already-computed stage result, writes one file, closes its figure
and returns the path.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 (needs the backend set)
import numpy as np  # noqa: E402

from .joint_gp import BuildTrace  # noqa: E402
from .quantile import QuantileReport  # noqa: E402
from .screening import ScreeningReport  # noqa: E402
from .sensitivity import SobolReport  # noqa: E402
from .validation import CoverageCurve, q2  # noqa: E402

_DPI = 120
_SELECTED_COLOR = "#2166ac"
_REJECTED_COLOR = "#bdbdbd"
_SERIES_COLORS = ("#2166ac", "#b2182b", "#4dac26", "#8073ac")


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_screening(report: ScreeningReport, path) -> Path:
    """Dependence measures per input, strongest at the top."""
    rows = sorted(report.inputs, key=lambda r: (-r.r2_hsic, r.index))
    names = [r.name for r in rows]
    values = [r.r2_hsic for r in rows]
    colors = [_SELECTED_COLOR if r.selected else _REJECTED_COLOR
              for r in rows]
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.35 * len(rows) + 1.2)))
    pos = np.arange(len(rows))[::-1]
    ax.barh(pos, values, color=colors)
    for y, row in zip(pos, rows):
        ax.annotate(f"p={row.p_value:.3g}", (row.r2_hsic, y),
                    xytext=(4, 0), textcoords="offset points",
                    va="center", fontsize=8)
    ax.set_yticks(pos, names)
    ax.set_xlabel("normalized dependence measure")
    ax.set_title(f"Input screening ({report.method} test, "
                 f"alpha={report.alpha:g}); selected inputs in blue")
    fig.tight_layout()
    return _save(fig, path)


def plot_build_trace(trace: BuildTrace, path) -> Path:
    """Cross-validated predictivity after each added input."""
    steps = [s.step for s in trace.steps]
    values = [s.loo_q2 for s in trace.steps]
    labels = [s.input_name for s in trace.steps]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(steps, values, marker="o", color=_SELECTED_COLOR)
    ax.set_xticks(steps, labels, rotation=45, ha="right")
    ax.set_ylim(min(0.0, min(values)) - 0.05, 1.02)
    ax.set_xlabel("input added at each build step")
    ax.set_ylabel("leave-one-out Q2")
    ax.set_title("Sequential metamodel build")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_coverage(curves: dict[str, CoverageCurve], path) -> Path:
    """Observed vs nominal central-interval coverage, per model."""
    fig, ax = plt.subplots(figsize=(5.5, 5.2))
    ax.plot([0, 1], [0, 1], color="black", linewidth=0.8, linestyle="--",
            label="ideal")
    for color, (label, curve) in zip(_SERIES_COLORS, sorted(curves.items())):
        ax.plot(curve.alphas, curve.observed, marker="o", markersize=3.5,
                color=color,
                label=f"{label} (max dev {curve.max_deviation():.3f})")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("nominal level")
    ax.set_ylabel("observed coverage")
    ax.set_title("Prediction-interval calibration")
    ax.legend(loc="upper left", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_sobol(report: SobolReport, path) -> Path:
    """First-order and total indices per input, interactions beside."""
    names = [e.names[0] for e in report.first]
    firsts = [e.clamped for e in report.first]
    first_se = [e.std_error for e in report.first]
    totals = [e.clamped for e in report.total_pii]
    total_se = [e.std_error for e in report.total_pii]
    pos = np.arange(len(names))
    width = 0.38
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.bar(pos - width / 2, firsts, width, yerr=first_se, capsize=3,
           color=_SELECTED_COLOR, label="first order")
    ax.bar(pos + width / 2, totals, width, yerr=total_se, capsize=3,
           color="#b2182b", label="total")
    labels = list(names)
    values = [*firsts, *totals]
    if report.second:
        inter_pos = len(names) + 0.6 + np.arange(len(report.second))
        inter = [e.clamped for e in report.second]
        ax.bar(inter_pos, inter, width * 1.4,
               yerr=[e.std_error for e in report.second], capsize=3,
               color="#4dac26", label="pure interaction")
        labels += ["+".join(e.names) for e in report.second]
        pos = np.concatenate([pos, inter_pos])
        values += inter
    ax.axhline(report.s_t_eps.clamped, color="#8073ac", linewidth=1.2,
               linestyle=":",
               label=f"unexplained-group total "
                     f"({report.s_t_eps.clamped:.3f})")
    ax.set_xticks(pos, labels, rotation=30, ha="right")
    ax.set_ylim(0, max(1.0, max(values) + 0.1))
    ax.set_ylabel("variance share")
    ax.set_title("Sensitivity indices from the metamodel")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_quantile(report: QuantileReport, path) -> Path:
    """Quantile estimates per method, with intervals where defined."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    pos = np.arange(len(report.entries))
    for i, entry in enumerate(report.entries):
        if entry.ci_low is not None:
            err = [[entry.estimate - entry.ci_low],
                   [entry.ci_high - entry.estimate]]
            ax.errorbar([i], [entry.estimate], yerr=err, fmt="o",
                        color=_SELECTED_COLOR, capsize=5)
        else:
            ax.plot([i], [entry.estimate], marker="s",
                    color="#b2182b")
    ax.set_xticks(pos, [e.method for e in report.entries], rotation=20,
                  ha="right")
    ax.set_ylabel(f"quantile at p={report.p:g}")
    ax.set_title("Quantile estimates (whiskers: "
                 f"{report.ci_level:.0%} intervals)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_predicted_vs_observed(y_obs, y_pred, path,
                               label: str = "test sample") -> Path:
    """Prediction scatter against the identity line."""
    y_obs = np.asarray(y_obs, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    lo = float(min(y_obs.min(), y_pred.min()))
    hi = float(max(y_obs.max(), y_pred.max()))
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    fig, ax = plt.subplots(figsize=(5.5, 5.2))
    ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], color="black",
            linewidth=0.8, linestyle="--")
    ax.plot(y_obs, y_pred, linestyle="", marker="o", markersize=3,
            alpha=0.6, color=_SELECTED_COLOR)
    ax.set_xlim(lo - pad, hi + pad)
    ax.set_ylim(lo - pad, hi + pad)
    ax.set_xlabel("observed output")
    ax.set_ylabel("predicted output")
    ax.set_title(f"Predictions on the {label} "
                 f"(Q2={q2(y_obs, y_pred):.3f})")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)
