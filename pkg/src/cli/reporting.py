"""终端表格与文件产物：JSON 报告、损失曲线 CSV、逐步绘图 CSV 及 gnuplot 脚本"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from ..config import Config
from ..logger import logger
from ..plant.models import CSV_FLOAT_FORMAT
from ..runner import Evaluation, ExperimentReport
from ..sysid import SysIdReport
from ..utils import write_json

console = Console()

GNUPLOT_TEMPLATE = """set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 1000,800
set output '{png}'
set multiplot layout 2,1
set title 'tracking: {name}'
set xlabel 't (step)'
plot '{csv}' using 1:2 with lines, '' using 1:5 with lines, '' using 1:6 with lines
set title 'reference: DNN vs exact inverse'
plot '{csv}' using 1:3 with lines, '' using 1:4 with lines dashtype 2
unset multiplot
"""


def _fmt(value: Optional[float], spec: str = ".4g") -> str:
    if value is None or (isinstance(value, float) and not np.isfinite(value)):
        return "-"
    return format(value, spec)


def sysid_table(name: str, report: SysIdReport) -> Table:
    table = Table(title=f"identify: {name}")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    table.add_row("relative degree r", str(report.relative_degree))
    table.add_row("DC gain", _fmt(report.dc_gain, ".6g"))
    zeros = ", ".join(f"{z.real:.6g}{z.imag:+.3g}j" if z.imag else f"{z.real:.6g}" for z in report.zeros)
    table.add_row("zeros", zeros or "-")
    verdict = {True: "yes", False: "NO", None: "undetermined"}[report.minimum_phase]
    table.add_row("minimum phase", verdict)
    table.add_row("near unit circle", "yes" if report.near_unit_circle else "no")
    table.add_row("step steady-state error", _fmt(report.step_steady_state_error))
    table.add_row("difference learning eligible", "yes" if report.difference_learning_eligible else "no")
    return table


def experiment_table(title: str, rows: Dict[str, ExperimentReport]) -> Table:
    table = Table(title=title)
    for col in ("run", "RMS baseline", "RMS enhanced", "reduction %", "RMS modeling", "diverged", "steady err"):
        table.add_column(col, justify="right" if col != "run" else "left")
    for name, report in rows.items():
        table.add_row(
            name,
            _fmt(report.rms_baseline),
            _fmt(report.rms_enhanced),
            _fmt(report.reduction_percent, ".2f"),
            _fmt(report.rms_modeling),
            f"step {report.diverged_at}" if report.diverged else "no",
            _fmt(report.steady_state_error),
        )
    return table


def key_value_table(title: str, columns: List[str], rows: Iterable[List[Any]]) -> Table:
    table = Table(title=title)
    for col in columns:
        table.add_column(col)
    for row in rows:
        table.add_row(*[str(v) for v in row])
    return table


def show(table: Table) -> None:
    console.print(table)


def artifact_path(config: Config, suffix: str) -> Path:
    return Path(config.experiment.output_dir) / f"{config.experiment.name}_{suffix}"


def provenance(config: Config, seeds: Dict[str, int]) -> Dict[str, Any]:
    return {"config": config.to_dict(), "seeds": seeds}


def save_json(path: Path, data: Dict[str, Any]) -> Path:
    write_json(path, data)
    logger.info(f"已写出: {path}")
    return path


def save_frame(path: Path, frame: pd.DataFrame) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info(f"已写出: {path}")
    return path


def save_loss_history(path: Path, history: np.ndarray) -> Path:
    return save_frame(path, pd.DataFrame({"iteration": np.arange(len(history)), "loss": history}))


def save_plot_data(config: Config, evaluation: Evaluation, tag: str = "") -> tuple[Path, Path]:
    """逐步 CSV（t, y_d, u_dnn, u_oracle, y_baseline, y_enhanced）与对应的 gnuplot 脚本"""
    stem = f"plot{('_' + tag) if tag else ''}"
    csv_path = save_frame(artifact_path(config, f"{stem}.csv"), evaluation.plot_frame())
    script_path = artifact_path(config, f"{stem}.gp")
    script_path.write_text(
        GNUPLOT_TEMPLATE.format(csv=csv_path.name, png=f"{csv_path.stem}.png", name=f"{config.experiment.name} {tag}"),
        encoding="utf-8",
    )
    logger.info(f"已写出: {script_path}")
    return csv_path, script_path
