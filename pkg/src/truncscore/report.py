"""Human-readable report blocks and structured (JSON) documents.

Numbers in the text blocks follow R's console formatting rules: a column
shares one fixed or scientific layout chosen from the significant digits each
entry needs.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .estimators import EstimationResult
from .testing import ClosedTestReport

__all__ = [
    "estimate_table",
    "format_column",
    "format_number",
    "format_pvalue",
    "parameter_matrix",
    "result_document",
    "summary_text",
    "test_blocks",
]

_EPS = 2.220446049250313e-16


def _sig_needed(x, digits):
    """Significant digits (<= digits) needed to show ``x`` rounded to ``digits``."""
    target = float(f"{x:.{digits - 1}e}")
    for s in range(1, digits + 1):
        if float(f"{x:.{s - 1}e}") == target:
            return s, target
    return digits, target


def format_column(values, digits=7):
    """Format numbers as R prints a numeric vector (common layout, right-justified)."""
    entries = []
    for v in values:
        if v is None or (isinstance(v, float) and math.isnan(v)):
            entries.append(None)
            continue
        v = float(v)
        if v == 0:
            entries.append((v, 1, 0))
            continue
        s, rounded = _sig_needed(v, digits)
        e = int(math.floor(math.log10(abs(rounded))))
        entries.append((v, s, e))
    real = [t for t in entries if t is not None]
    if not real:
        return ["NA"] * len(entries)
    neg = any(t[0] < 0 for t in real)
    rgt = max(max(0, s - 1 - e) for _, s, e in real)
    left = max(max(1, e + 1) for _, s, e in real)
    width_fixed = neg + left + (1 if rgt else 0) + rgt
    mant = max(s - 1 for _, s, e in real)
    big_exp = any(abs(e) >= 100 for _, s, e in real)
    width_sci = neg + (1 if mant else 0) + mant + 1 + (5 if big_exp else 4)
    if width_fixed <= width_sci:
        out = [f"{t[0]:.{rgt}f}" if t is not None else "NA" for t in entries]
    else:
        out = [f"{t[0]:.{mant}e}" if t is not None else "NA" for t in entries]
    width = max(len(x) for x in out)
    return [x.rjust(width) for x in out]


def format_number(x, digits=7):
    return format_column([x], digits)[0].strip()


def format_pvalue(p, digits=4):
    """R's p-value rendering: ``< 2.2e-16`` below machine epsilon."""
    if p < _EPS:
        return "< 2.2e-16"
    return format_number(p, digits)


def _matrix(rownames, header, columns, separator_after=None):
    names_w = max(len(r) for r in rownames)
    cols = []
    for h, col in zip(header, columns):
        w = max(len(h), max(len(c) for c in col))
        cols.append((h.rjust(w), [c.rjust(w) for c in col]))
    lines = [" " * names_w + "".join(" " + h for h, _ in cols)]
    total = len(lines[0])
    for i, name in enumerate(rownames):
        lines.append(name.ljust(names_w) + "".join(" " + col[i] for _, col in cols))
        if separator_after is not None and i == separator_after:
            lines.append(("-" * names_w).ljust(total))
    return "\n".join(lines) + "\n"


def estimate_table(res: EstimationResult, digits=4):
    """Six-row estimate table with Wald limits and two-sided p-values."""
    rows = res.rows()
    cols = [
        format_column([r["estimate"] for r in rows], digits),
        format_column([r["se"] for r in rows], digits),
        format_column([r["lower"] for r in rows], digits),
        format_column([r["upper"] for r in rows], digits),
        [f"{r['p_value']:.{digits - 1}e}" for r in rows],
    ]
    return _matrix([r["label"] for r in rows],
                   ["Estimate", "Std.Err", "2.5%", "97.5%", "P-value"], cols, separator_after=2)


def _labels(tau):
    t = f"{tau:.1f}"
    return (f"E(Y|T>{t},A=1) - E(Y|T>{t},A=0)", f"P(T>{t}|A=1) - P(T>{t}|A=0)")


def _named_value(name, value):
    v = format_number(value, 7)
    w = max(len(name), len(v))
    return f"{name.rjust(w)} \n{v.rjust(w)} \n"


def _single_block(name, label, null_value, estimate, stat, p):
    null = format_number(null_value)
    return (
        f"\n{name} = {label}\n\n\tSigned Wald Test\n\n"
        f"data:  H0: {name} =< {null}\n"
        f"Q = {format_number(stat, 5)}, p-value {_p_phrase(p)}\n"
        f"alternative hypothesis: HA: {name} > {null}\n"
        f"sample estimates:\n" + _named_value(name, estimate)
    )


def _p_phrase(p):
    s = format_pvalue(p)
    return s if s.startswith("<") else f"= {s}"


def _margin(x):
    return 0.0 if x == 0 else x


def test_blocks(res: EstimationResult, report: ClosedTestReport):
    """One-sided test blocks and the intersection block."""
    lab_y, lab_t = _labels(res.tau)
    null_y = _margin(report.delta_y)
    null_t = _margin(-report.delta_t)
    one_sided = (
        _single_block("b1", lab_y, null_y, res.psi_y, report.single_y.statistic, report.single_y.p_value)
        + "\n"
        + _single_block("b2", lab_t, null_t, res.psi_t, report.single_t.statistic, report.single_t.p_value)
    )
    inter = report.intersection
    intersection = (
        "\n\tSigned Wald Intersection Test\n\ndata:  \n"
        f"Intersection null hypothesis: b =< [{format_number(null_y)}, {format_number(null_t)}]\n"
        "w = [0.5, 0.5]\n"
        f"Q = {format_number(inter.statistic, 5)}, p-value {_p_phrase(inter.p_value)}\n"
    )
    return one_sided, intersection


def summary_text(res: EstimationResult, report: ClosedTestReport):
    """Parameter estimates, one-sided tests and intersection test blocks."""
    one_sided, intersection = test_blocks(res, report)
    return ("-- Parameter estimates --\n" + estimate_table(res)
            + "-- One-sided tests --\n" + one_sided
            + "-- Intersection test --\n" + intersection)


def decisions_text(report: ClosedTestReport):
    def word(x):
        return "reject" if x else "retain"
    return (
        f"\nClosed testing (alpha = {format_number(report.alpha)}): "
        f"H0 b1 {word(report.reject_y)}, H0 b2 {word(report.reject_t)}\n"
        f"Bonferroni-Holm (alpha = {format_number(report.alpha)}): "
        f"H0 b1 {word(report.holm_y)}, H0 b2 {word(report.holm_t)}\n"
    )


def parameter_matrix(res: EstimationResult, report: ClosedTestReport):
    """Estimate / statistic / p-value matrix for b1, b2 and the intersection."""
    est = format_column([res.psi_y, res.psi_t, None], 7)
    stat = format_column([report.single_y.statistic, report.single_t.statistic,
                          report.intersection.statistic], 7)
    pv = format_column([report.single_y.p_value, report.single_t.p_value,
                        report.intersection.p_value], 7)
    return _matrix(["b1", "b2", "intersection"], ["estimate", "statistic", "p.value"], [est, stat, pv])


def result_document(res: EstimationResult, report: ClosedTestReport = None):
    """Structured, full-precision companion of the text report."""
    doc = {"estimation": res.to_dict()}
    if report is not None:
        doc["test"] = report.to_dict()
    return doc


def dumps(doc):
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")
