"""Group fairness metrics, loan approval ratios and Lorenz summaries.

Rates are reported in percent.  A rate that is undefined for a group (for
example a true positive rate when the group has no positive labels) is
``None`` rather than 0, so a missing value never passes for parity.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import swf

GROUP_ORDER = ("young", "old")
RATE_FIELDS = ("positive_rate", "true_positive_rate", "true_negative_rate")
RATE_TITLES = {
    "positive_rate": "Positive rate (%)",
    "true_positive_rate": "True positive rate (%)",
    "true_negative_rate": "True negative rate (%)",
}


class MetricsError(ValueError):
    pass


class EmptyGroupError(MetricsError):
    pass


class NoQualifiedMembersError(MetricsError):
    pass


class NoSelectedMembersError(MetricsError):
    pass


class ZeroRequestTotalError(MetricsError):
    pass


class ZeroSumError(MetricsError):
    pass


# --- bias metrics written as welfare functions --------------------------------

def _binary(x, name):
    a = np.asarray(x)
    if not np.all(np.isin(a, (0, 1))):
        raise MetricsError(f"{name} must contain only 0 and 1")
    return a.astype(float)


@dataclass(frozen=True)
class SelectionInstance:
    """Selections ``u``, qualifications ``a`` and the protected-group mask."""

    selected: np.ndarray
    qualified: np.ndarray
    protected: np.ndarray

    def __post_init__(self):
        u = _binary(self.selected, "selected")
        a = _binary(self.qualified, "qualified")
        g = np.asarray(self.protected, dtype=bool)
        if not (u.shape == a.shape == g.shape) or u.ndim != 1:
            raise MetricsError("selected, qualified and protected must be aligned 1-D arrays")
        if not g.any() or g.all():
            raise EmptyGroupError("both the protected group and its complement must be nonempty")
        object.__setattr__(self, "selected", u)
        object.__setattr__(self, "qualified", a)
        object.__setattr__(self, "protected", g)

    def halves(self):
        return self.protected, ~self.protected


def demographic_parity(inst: SelectionInstance) -> float:
    """``1 - |selection rate(N) - selection rate(N')|``."""
    N, M = inst.halves()
    u = inst.selected
    return 1.0 - abs(u[N].mean() - u[M].mean())


def equality_of_opportunity(inst: SelectionInstance) -> float:
    """``1 - |TPR(N) - TPR(N')|`` with ``TPR = sum(a*u) / sum(a)``."""
    u, a = inst.selected, inst.qualified
    rates = []
    for mask in inst.halves():
        q = a[mask].sum()
        if q == 0:
            raise NoQualifiedMembersError("a group has no qualified members")
        rates.append((a[mask] * u[mask]).sum() / q)
    return 1.0 - abs(rates[0] - rates[1])


def predictive_rate_parity(inst: SelectionInstance) -> float:
    """``1 - |precision(N) - precision(N')|`` with ``precision = sum(a*u) / sum(u)``."""
    u, a = inst.selected, inst.qualified
    rates = []
    for mask in inst.halves():
        s = u[mask].sum()
        if s == 0:
            raise NoSelectedMembersError("a group has no selected members")
        rates.append((a[mask] * u[mask]).sum() / s)
    return 1.0 - abs(rates[0] - rates[1])


# --- classification reports ---------------------------------------------------

@dataclass(frozen=True)
class GroupRates:
    group: str
    size: int
    positive_rate: float
    true_positive_rate: float | None
    true_negative_rate: float | None

    def get(self, field: str) -> float | None:
        return getattr(self, field)


@dataclass(frozen=True)
class GroupReport:
    groups: Mapping[str, GroupRates]

    def gap(self, field: str, a: str = "young", b: str = "old") -> float | None:
        x, y = self.groups[a].get(field), self.groups[b].get(field)
        return None if x is None or y is None else abs(x - y)


def _pct(num, den):
    return None if den == 0 else 100.0 * num / den


def classification_group_report(predictions, labels, groups,
                                group_order: Sequence[str] = GROUP_ORDER) -> GroupReport:
    pred = np.asarray(predictions)
    y = np.asarray(labels)
    g = np.asarray(groups)
    if not (pred.shape == y.shape == g.shape):
        raise MetricsError("predictions, labels and groups must be aligned")
    out = {}
    for name in group_order:
        m = g == name
        if not m.any():
            raise EmptyGroupError(f"group {name!r} is empty")
        p, t = pred[m] == 1, y[m] == 1
        out[name] = GroupRates(
            name,
            int(m.sum()),
            _pct(p.sum(), m.sum()),
            _pct((p & t).sum(), t.sum()),
            _pct((~p & ~t).sum(), (~t).sum()),
        )
    return GroupReport(out)


@dataclass(frozen=True)
class AggregateReport:
    """Mean and sample standard deviation (ddof 1) of each rate across splits."""

    mean: Mapping[str, Mapping[str, float | None]]
    sd: Mapping[str, Mapping[str, float | None]]
    n_splits: int

    def gap(self, field: str, a: str = "young", b: str = "old") -> float | None:
        x, y = self.mean[a][field], self.mean[b][field]
        return None if x is None or y is None else abs(x - y)


def aggregate_reports(reports: Sequence[GroupReport]) -> AggregateReport:
    if not reports:
        raise MetricsError("no reports to aggregate")
    names = list(reports[0].groups)
    mean, sd = {}, {}
    for name in names:
        mean[name], sd[name] = {}, {}
        for field in RATE_FIELDS:
            vals = [r.groups[name].get(field) for r in reports]
            vals = np.array([v for v in vals if v is not None])
            mean[name][field] = float(vals.mean()) if vals.size else None
            sd[name][field] = float(vals.std(ddof=1)) if vals.size > 1 else (0.0 if vals.size else None)
    return AggregateReport(mean, sd, len(reports))


def _fmt(v):
    return "NA" if v is None else f"{v:.2f}"


def report_csv(report: GroupReport | AggregateReport, header_lines: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(report, AggregateReport):
        w.writerow(["group"] + [f"{f}_{s}" for f in RATE_FIELDS for s in ("mean", "sd")])
        for name in report.mean:
            w.writerow([name] + [_fmt(getattr(report, s)[name][f])
                                 for f in RATE_FIELDS for s in ("mean", "sd")])
    else:
        w.writerow(["group", "size", *RATE_FIELDS])
        for name, r in report.groups.items():
            w.writerow([name, r.size] + [_fmt(r.get(f)) for f in RATE_FIELDS])
    return buf.getvalue()


def format_table(report: AggregateReport) -> str:
    """Plain-text table of ``mean ± sd`` per group, two decimals."""
    names = list(report.mean)
    rows = [[""] + [n.capitalize() for n in names]]
    for f in RATE_FIELDS:
        cells = []
        for n in names:
            m, s = report.mean[n][f], report.sd[n][f]
            cells.append("NA" if m is None else f"{m:.2f} ± {s:.2f}")
        rows.append([RATE_TITLES[f]] + cells)
    widths = [max(len(r[k]) for r in rows) for k in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# --- allocation summaries -----------------------------------------------------

@dataclass(frozen=True)
class ApprovalRatio:
    all_ratio: float
    qualified_ratio: float | None


def approval_ratios(granted, requests, groups, qualified,
                    group_order: Sequence[str] | None = None) -> dict[str, ApprovalRatio]:
    """Granted over requested amount per group, pro rata for partial grants.

    ``granted`` may be an allocation solution or a plain array.
    """
    d = np.asarray(getattr(granted, "granted", granted), dtype=float)
    r = np.asarray(requests, dtype=float)
    g = np.asarray(groups)
    q = np.asarray(qualified, dtype=bool)
    if not (d.shape == r.shape == g.shape == q.shape):
        raise MetricsError("granted, requests, groups and qualified must be aligned")
    names = group_order if group_order is not None else list(dict.fromkeys(g.tolist()))
    out = {}
    for name in names:
        m = g == name
        total = r[m].sum()
        if total <= 0:
            raise ZeroRequestTotalError(f"group {name!r} requested nothing")
        mq = m & q
        qtotal = r[mq].sum()
        out[name] = ApprovalRatio(
            float(d[m].sum() / total),
            float(d[mq].sum() / qtotal) if qtotal > 0 else None,
        )
    return out


@dataclass(frozen=True)
class LorenzSummary:
    population_share: np.ndarray
    value_share: np.ndarray
    gini: float


def lorenz_and_gini(values) -> LorenzSummary:
    """Lorenz curve points (starting at the origin) and the Gini index.

    The index is the trapezoid-rule area form ``1 - sum(L[k-1] + L[k]) / n``,
    which equals ``1 - swf.gini(values)``.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0 or np.any(v < 0):
        raise MetricsError("values must be a nonempty nonnegative sequence")
    total = v.sum()
    if total <= 0:
        raise ZeroSumError("values sum to zero")
    n = v.size
    L = np.concatenate(([0.0], np.cumsum(v) / total))
    pop = np.arange(n + 1) / n
    return LorenzSummary(pop, L, float(1.0 - (L[:-1] + L[1:]).sum() / n))


def gini_via_swf(values) -> float:
    return 1.0 - swf.gini(values)
