"""Report writers: machine-readable CSV plus aligned human-readable tables.

Every artifact embeds the config snapshot and a version string so results
stay self-describing; float formatting is fixed-precision so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import subprocess
from pathlib import Path

from . import __version__
from .config import ExperimentConfig
from .evaluate import EvaluationResult
from .metrics import MetricsReport

_METRIC_COLUMNS = (
    "mpjpe_mm",
    "orientation_error",
    "translation_error_mm",
    "acceleration_error_mm_s2",
)


def version_string() -> str:
    """Git describe when available, package version otherwise."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"egosocial-{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"egosocial-{__version__}"


def _provenance_lines(config: ExperimentConfig, comment: str = "#") -> list[str]:
    lines = [f"{comment} version: {version_string()}"]
    lines += [f"{comment} config.{line}" for line in config.to_text().strip().splitlines()]
    return lines


def write_metrics_report(path, report: MetricsReport, config: ExperimentConfig,
                         extra: dict | None = None) -> None:
    """Key/value text report with embedded provenance."""
    lines = [f"version: {version_string()}"]
    if extra:
        lines += [f"{k}: {v}" for k, v in extra.items()]
    lines.append(report.to_text().rstrip("\n"))
    lines.append("config_begin")
    lines.append(config.to_text().rstrip("\n"))
    lines.append("config_end")
    Path(path).write_text("\n".join(lines) + "\n")


def write_per_sequence_csv(path, result: EvaluationResult, config: ExperimentConfig) -> None:
    lines = _provenance_lines(config)
    cols = list(result.per_sequence[0].keys())
    lines.append(",".join(cols))
    for row in result.per_sequence:
        cells = []
        for c in cols:
            v = row[c]
            cells.append(str(v) if isinstance(v, int) else f"{v:.6f}")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def _report_cells(report: MetricsReport | None) -> list[str]:
    if report is None:
        return ["" for _ in _METRIC_COLUMNS]
    return [
        f"{report.mpjpe:.6f}",
        f"{report.orientation_error:.6f}",
        f"{report.translation_error:.6f}",
        f"{report.acceleration_error:.6f}",
    ]


def write_ablation_csv(path, rows, config: ExperimentConfig) -> None:
    """Rows are (label, n_sequences, EvaluationResult | None)."""
    lines = _provenance_lines(config)
    lines.append("variant,n_sequences," + ",".join(_METRIC_COLUMNS))
    for label, n, result in rows:
        report = result.report_mean if result is not None else None
        lines.append(",".join([label, str(n)] + _report_cells(report)))
    Path(path).write_text("\n".join(lines) + "\n")


def ablation_table(rows) -> str:
    """Aligned human-readable twin of the ablation CSV."""
    header = ["variant", "n", "MPJPE(mm)", "Orient", "Transl(mm)", "Accel(mm/s^2)"]
    body = []
    for label, n, result in rows:
        cells = _report_cells(result.report_mean if result is not None else None)
        body.append([label, str(n)] + cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join(fmt.format(*row) for row in [header] + body) + "\n"
