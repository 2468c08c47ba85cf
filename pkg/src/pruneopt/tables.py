"""Render replication aggregates as benchmark tables.

Rows are ``method x metric`` (Probability, Gradient, Function), columns are
stage counts ``T``. Counts print as ``m.mm (±h.h)×10ᵉ`` with the half-width
scaled by the same power of ten; probabilities print as plain decimals.
"""
from __future__ import annotations

import csv
import io
import math
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

METRICS = ("Probability", "Gradient", "Function")
MISSING = "n/a*"
_SUPERSCRIPT = str.maketrans("-0123456789", "⁻⁰¹²³⁴⁵⁶⁷⁸⁹")


def _hw_text(hw: Optional[float], digits: int) -> str:
    if hw is None:
        return "±n/a"
    if hw == 0:
        return "±0.0"
    return f"±{hw:.{digits}f}"


def format_count(mean: float, hw: Optional[float]) -> str:
    """``9.02e6`` with half-width 0 becomes ``9.02 (±0.0)×10⁶``."""
    if not math.isfinite(mean):
        return MISSING
    if mean == 0:
        return f"0.00 ({_hw_text(hw, 1)})"
    e = math.floor(math.log10(abs(mean)))
    mant = mean / 10 ** e
    if round(mant, 2) >= 10:  # rounding carried into the next decade
        e += 1
        mant = mean / 10 ** e
    scaled = None if hw is None else hw / 10 ** e
    return f"{mant:.2f} ({_hw_text(scaled, 1)})×10{str(e).translate(_SUPERSCRIPT)}"


def format_probability(mean: Optional[float], hw: Optional[float]) -> str:
    """``0.914`` with half-width ``0.0197`` becomes ``0.914 (±0.02)``; a sure outcome is ``1.0 (±0.0)``."""
    if mean is None or not math.isfinite(mean):
        return MISSING
    text = f"{mean:.3f}".rstrip("0")
    if text.endswith("."):
        text += "0"
    return f"{text} ({_hw_text(hw, 2)})"


def _cell(agg, metric: str) -> str:
    if agg is None:
        return MISSING
    if metric == "Probability":
        return format_probability(agg.probability, agg.probability_hw)
    if metric == "Gradient":
        return format_count(agg.gradient, agg.gradient_hw)
    return format_count(agg.function, agg.function_hw)


def table_rows(grid: Mapping[Tuple[str, int], object], methods: Iterable[str] = ("exact", "asymptotic"),
               stages: Optional[Iterable[int]] = None) -> Tuple[List[str], List[List[str]]]:
    """Header and body rows for ``grid[(method, T)] -> Aggregate``.

    With an empty grid and no explicit ``stages`` the body is empty.
    """
    if stages is None:
        stages = sorted({T for _, T in grid})
    stages = list(stages)
    header = ["Method", "Metric"] + [f"T={T}" for T in stages]
    body = []
    if not grid:
        return header, body
    for method in methods:
        for metric in METRICS:
            body.append([method, metric] + [_cell(grid.get((method, T)), metric) for T in stages])
    return header, body


def emit_tables(grid: Mapping[Tuple[str, int], object], methods=("exact", "asymptotic"),
                stages=None) -> Dict[str, str]:
    """CSV and markdown renderings of the grid; keys ``"csv"`` and ``"markdown"``."""
    header, body = table_rows(grid, methods, stages)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(body)
    md = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    md += ["| " + " | ".join(row) + " |" for row in body]
    return {"csv": buf.getvalue(), "markdown": "\n".join(md) + "\n"}
