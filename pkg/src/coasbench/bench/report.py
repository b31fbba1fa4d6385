"""Reporting: assemble the pseudo-dataset rank table (one row per
dataset x model size, cells averaged over trials), mean ranks, the Friedman
test over a configurable top subset, all pairwise Wilcoxon tests, and SVG
figures (per-dataset metric curves with 95% bands, mean-rank bars).

Reports are computed purely from the results file; nothing is retrained.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..evalstats import RankTable, TestResult, friedman_test, mean_ranks, wilcoxon_signed_rank
from .config import METRIC_BY_TASK, ORIENTATION_BY_METRIC
from .runner import read_records
from . import svg

# two-sided 95% t critical values by degrees of freedom; normal beyond 30
_T95 = {
    1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571, 6: 2.447, 7: 2.365,
    8: 2.306, 9: 2.262, 10: 2.228, 11: 2.201, 12: 2.179, 13: 2.160, 14: 2.145,
    15: 2.131, 16: 2.120, 17: 2.110, 18: 2.101, 19: 2.093, 20: 2.086,
    21: 2.080, 22: 2.074, 23: 2.069, 24: 2.064, 25: 2.060, 26: 2.056,
    27: 2.052, 28: 2.048, 29: 2.045, 30: 2.042,
}


class ReportError(ValueError):
    pass


def _size_sort_key(tag: str):
    parts = []
    for piece in tag.split(","):
        parts.append(float(piece.split("=")[1]))
    return tuple(parts)


@dataclass
class ReportResult:
    table: RankTable
    mean_ranks: dict[str, float]
    friedman: TestResult | None
    friedman_methods: list[str] | None
    wilcoxon: dict[tuple[str, str], TestResult]
    figures: list[str]
    notices: list[str]
    text: str


def _collect(records):
    """(dataset, size, method) -> list of metric values over trials."""
    cells: dict[tuple, list[float]] = {}
    for r in records:
        cells.setdefault((r["dataset"], r["size"], r["method"]), []).append(
            r["metric_value"]
        )
    return cells


def build_rank_table(records, metric_name: str) -> RankTable:
    good = [r for r in records if r["metric_name"] == metric_name]
    if not good:
        raise ReportError(f"no '{metric_name}' records in results file")
    methods = sorted({r["method"] for r in good})
    row_ids = sorted({(r["dataset"], r["size"]) for r in good},
                     key=lambda t: (t[0], _size_sort_key(t[1])))
    cells = _collect(good)
    gaps = [
        f"{d}/{s}/{m}" for (d, s) in row_ids for m in methods if (d, s, m) not in cells
    ]
    if gaps:
        raise ReportError("missing cells: " + ", ".join(gaps))
    values = np.array(
        [[float(np.mean(cells[(d, s, m)])) for m in methods] for (d, s) in row_ids]
    )
    return RankTable(rows=[f"{d}|{s}" for (d, s) in row_ids], methods=methods,
                     values=values, orientation=ORIENTATION_BY_METRIC[metric_name])


def _friedman_subset(table: RankTable, ranks: dict[str, float],
                     top: int | None) -> list[str] | None:
    methods = list(table.methods)
    if len(methods) < 3 and top is None:
        return None
    orderered = sorted(methods, key=lambda m: ranks[m])
    if top is not None:
        keep = orderered[: max(2, top)]
    else:
        keep = orderered[:-1]  # all but the worst by mean rank
    return keep if len(keep) >= 2 else None


def _t_half_width(values: np.ndarray) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    t = _T95.get(n - 1, 1.96)
    return t * float(values.std(ddof=1)) / math.sqrt(n)


def _figures(records, metric_name, out_dir: Path) -> list[str]:
    good = [r for r in records if r["metric_name"] == metric_name]
    methods = sorted({r["method"] for r in good})
    datasets = sorted({r["dataset"] for r in good})
    cells = _collect(good)
    paths = []
    for ds in datasets:
        sizes = sorted({r["size"] for r in good if r["dataset"] == ds},
                       key=_size_sort_key)
        series = []
        for m in methods:
            means, hws = [], []
            for s in sizes:
                vals = np.array(cells[(ds, s, m)])
                means.append(float(vals.mean()))
                hws.append(_t_half_width(vals))
            series.append((m, means, hws))
        path = out_dir / f"metric_{ds}.svg"
        svg.line_chart(path, f"{ds}: {metric_name} by model size (95% band)",
                       sizes, series, metric_name)
        paths.append(str(path))
    return paths


def report(results_path, friedman_top: int | None = None,
           output_dir=None) -> ReportResult:
    records = read_records(results_path)
    if not records:
        raise ReportError("results file is empty")
    errors = [r for r in records if r["metric_name"] == "error"]
    if errors:
        gaps = sorted({f"{r['dataset']}/{r['size']}/{r['method']}/t{r['trial']}" for r in errors})
        raise ReportError("failed cells present: " + ", ".join(gaps))
    task = records[0]["task"]
    metric_name = METRIC_BY_TASK[task]
    table = build_rank_table(records, metric_name)
    out_dir = Path(output_dir) if output_dir is not None else Path(results_path).parent
    out_dir.mkdir(parents=True, exist_ok=True)

    notices: list[str] = []
    lines: list[str] = [f"task: {task}", f"metric: {metric_name} ({table.orientation})",
                        f"pseudo-dataset rows: {len(table.rows)}"]

    friedman = None
    subset = None
    if len(table.methods) < 2:
        ranks = {}
        notices.append("single method: means emitted, no ranks or tests")
        lines.append("")
        lines.append(f"per-row means for {table.methods[0]}:")
        for row_id, value in zip(table.rows, table.values[:, 0]):
            lines.append(f"  {row_id:24s} {value:.6g}")
    else:
        ranks = mean_ranks(table)
        lines.append("")
        lines.append("mean ranks (lower is better):")
        for m, r in sorted(ranks.items(), key=lambda kv: kv[1]):
            lines.append(f"  {m:12s} {r:.4f}")
        subset = _friedman_subset(table, ranks, friedman_top)
        if subset is None:
            notices.append("only two models being compared; the Friedman test "
                           "cannot be performed")
        else:
            friedman = friedman_test(table, subset)
            lines.append("")
            lines.append(
                f"friedman over {subset}: statistic={friedman.statistic:.4f} "
                f"p={friedman.p_value:.4g} ({friedman.method})"
            )

    wilcoxon: dict[tuple[str, str], TestResult] = {}
    if len(table.methods) >= 2:
        lines.append("")
        lines.append("pairwise wilcoxon signed-rank (two-sided):")
        for i, a in enumerate(table.methods):
            for b in table.methods[i + 1:]:
                res = wilcoxon_signed_rank(table.values[:, table.methods.index(a)],
                                           table.values[:, table.methods.index(b)])
                wilcoxon[(a, b)] = res
                lines.append(
                    f"  {a} vs {b}: W={res.statistic:.1f} p={res.p_value:.4g} "
                    f"n={res.n_effective} ({res.method})"
                )

    figures = _figures(records, metric_name, out_dir)
    if ranks:
        rank_fig = out_dir / "mean_ranks.svg"
        ordered = sorted(ranks.items(), key=lambda kv: kv[1])
        svg.bar_chart(rank_fig, f"mean ranks ({task})",
                      [m for m, _ in ordered], [r for _, r in ordered])
        figures.append(str(rank_fig))

    for n in notices:
        lines.append(f"note: {n}")
    text = "\n".join(lines)
    (out_dir / "report.txt").write_text(text + "\n", encoding="utf-8")
    return ReportResult(table=table, mean_ranks=ranks, friedman=friedman,
                        friedman_methods=subset, wilcoxon=wilcoxon,
                        figures=figures, notices=notices, text=text)
