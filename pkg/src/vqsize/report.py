"""CSV renderings of sweeps, traces, statistics and evaluation reports.

Every table has a header row; rows come in speaker order, then bits
ascending. Floats use ``repr`` so reruns are byte-identical.
"""

from __future__ import annotations

import math

import numpy as np


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def sweep_rates_csv(sweep) -> str:
    rows = [(s, b, sweep.rates[i, j])
            for i, s in enumerate(sweep.speakers)
            for j, b in enumerate(sweep.bits)
            if not np.isnan(sweep.rates[i, j])]
    return csv_text(["speaker", "bits", "rate"], rows)


def sweep_histogram_csv(sweep) -> str:
    return csv_text(["bits", "count"], sorted(sweep.histogram.items()))


def size_rate_csv(rows, rate_name="overall_rate") -> str:
    return csv_text(["mean_bits", rate_name, "mode"], rows)


def greedy_trace_csv(traces) -> str:
    rows = []
    for t in traces:
        rows.append((t.init_bits, 0, "", "", t.initial_rate, float(t.init_bits)))
        for n, step in enumerate(t.iterations, 1):
            rows.append((t.init_bits, n, step.speaker, step.new_bits, step.overall_rate,
                         step.mean_bits))
    return csv_text(["init_bits", "iteration", "speaker", "new_bits", "overall_rate", "mean_bits"],
                    rows)


def assignment_csv(assignment: dict, speakers) -> str:
    return csv_text(["speaker", "bits"], [(s, assignment[s]) for s in speakers])


def read_assignment(path) -> dict:
    out = {}
    with open(path) as f:
        header = f.readline().strip().split(",")
        if header[:2] != ["speaker", "bits"]:
            raise ValueError(f"{path}: expected header 'speaker,bits'")
        for line in f:
            if line.strip():
                s, b = line.strip().split(",")[:2]
                out[s] = int(b)
    return out


def stats_csv(stats) -> str:
    return csv_text(["speaker", "bits", "mean_self", "std_other", "ratio"],
                    [(st.speaker, st.bits, st.mean_self, st.std_other, st.ratio) for st in stats])


def report_csv(report) -> str:
    rows = [(s, n, c, c / n) for s, n, c in zip(report.speakers, report.n_test, report.n_correct)
            if n > 0]
    rows.append(("overall", int(report.n_test.sum()), int(report.n_correct.sum()),
                 report.overall_rate))
    return csv_text(["speaker", "n_test", "n_correct", "rate"], rows)


def confusion_csv(report) -> str:
    rows = [[s] + list(row) for s, row in zip(report.speakers, report.confusion)]
    return csv_text(["true/predicted"] + list(report.speakers), rows)
