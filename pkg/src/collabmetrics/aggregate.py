"""Sector-mean normalization and staff-weighted area aggregation.

Cell values are first divided by the unweighted mean over the
universities active in the same sector, then combined per (university,
area) as a mean weighted by period-average staff.  Undefined values
are skipped and the weights renormalized over what remains; rows of
universities below the staff threshold are flagged for exclusion.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

from .corpus import SectorMap
from .indicators import IndicatorRecord

# aggregate field -> indicator record field feeding its normalization
AGGREGATE_SOURCES = {
    "P": "P",
    "FP": "FP",
    "QP": "QP",
    "FQP": "FQP",
    "QI": "QI",
    "CI": None,  # resolved by ci_mode
    "FCI": "FCI",
    "DCI": "DCI",
    "CI_UNI": "CI_UNI",
    "CI_DPR": "CI_DPR",
}

AREA_INDICATORS = ("P", "FP", "QP", "FQP", "QI", "CI", "FCI", "DCI")

CI_MODES = {"share": "CI_share", "ratio": "CI_ratio"}


class AggregateError(Exception):
    pass


@dataclass(frozen=True)
class NormalizedCell:
    """One (university, sds) cell rescaled to its sector means."""

    university: str
    sds: str
    Pn: float | None
    FPn: float | None
    QPn: float | None
    FQPn: float | None
    QIn: float | None
    CIn: float | None
    FCIn: float | None
    DCIn: float | None
    CI_UNIn: float | None
    CI_DPRn: float | None
    Add: float  # staff weight: period-average headcount


@dataclass(frozen=True)
class NormalizeResult:
    cells: tuple[NormalizedCell, ...]
    # (sds, indicator) pairs whose sector mean was zero, once per pair
    zero_mean: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class AreaAggregate:
    """Staff-weighted normalized indicator values of one (university, area)."""

    university: str
    area: str
    P: float | None
    FP: float | None
    QP: float | None
    FQP: float | None
    QI: float | None
    CI: float | None
    FCI: float | None
    DCI: float | None
    total_staff: float
    n_sectors: int


@dataclass(frozen=True)
class Exclusion:
    university: str
    area: str
    area_staff: float


@dataclass(frozen=True)
class FilterResult:
    kept: tuple[AreaAggregate, ...]
    excluded: tuple[Exclusion, ...]


def normalize_to_sds_mean(
    records: list[IndicatorRecord], ci_mode: str = "share"
) -> NormalizeResult:
    """Divide each cell value by the unweighted mean over its sector.

    The mean runs over universities with a defined value; undefined
    inputs stay undefined.  Sectors whose mean for an indicator is zero
    cannot be normalized; those values become undefined and the (sds,
    indicator) pair is reported once in ``zero_mean``.
    """
    if ci_mode not in CI_MODES:
        raise AggregateError(f"unknown ci_mode '{ci_mode}' (use share|ratio)")
    sources = dict(AGGREGATE_SOURCES)
    sources["CI"] = CI_MODES[ci_mode]

    by_sds: dict[str, list[IndicatorRecord]] = {}
    for rec in records:
        by_sds.setdefault(rec.sds, []).append(rec)

    means: dict[tuple[str, str], float | None] = {}
    zero_mean: list[tuple[str, str]] = []
    for sds in sorted(by_sds):
        for target, source in sources.items():
            defined = [
                getattr(rec, source)
                for rec in by_sds[sds]
                if getattr(rec, source) is not None
            ]
            if not defined:
                means[(sds, target)] = None
                continue
            mean = math.fsum(defined) / len(defined)
            if mean == 0.0:
                means[(sds, target)] = None
                zero_mean.append((sds, target))
            else:
                means[(sds, target)] = mean

    cells = []
    for rec in records:
        normalized: dict[str, float | None] = {}
        for target, source in sources.items():
            value = getattr(rec, source)
            mean = means[(rec.sds, target)]
            normalized[target] = None if value is None or mean is None else value / mean
        cells.append(
            NormalizedCell(
                university=rec.university,
                sds=rec.sds,
                Pn=normalized["P"],
                FPn=normalized["FP"],
                QPn=normalized["QP"],
                FQPn=normalized["FQP"],
                QIn=normalized["QI"],
                CIn=normalized["CI"],
                FCIn=normalized["FCI"],
                DCIn=normalized["DCI"],
                CI_UNIn=normalized["CI_UNI"],
                CI_DPRn=normalized["CI_DPR"],
                Add=rec.staff,
            )
        )
    return NormalizeResult(cells=tuple(cells), zero_mean=tuple(zero_mean))


def aggregate_area(
    cells: Iterable[NormalizedCell], sectors: SectorMap
) -> list[AreaAggregate]:
    """Staff-weighted mean of normalized cells per (university, area).

    For each indicator the sum runs over cells where the value is
    defined, with weights renormalized accordingly; when no positive
    weight remains the aggregate is undefined.
    """
    groups: dict[tuple[str, str], list[NormalizedCell]] = {}
    for cell in cells:
        area = sectors.area_of(cell.sds)
        groups.setdefault((cell.university, area), []).append(cell)

    aggregates = []
    for (univ, area) in sorted(groups):
        group = groups[(univ, area)]
        values: dict[str, float | None] = {}
        for indicator in AREA_INDICATORS:
            terms = [
                (getattr(cell, indicator + "n"), cell.Add)
                for cell in group
                if getattr(cell, indicator + "n") is not None
            ]
            weight_total = math.fsum(w for _v, w in terms)
            if weight_total > 0:
                values[indicator] = math.fsum(v * w for v, w in terms) / weight_total
            else:
                values[indicator] = None
        aggregates.append(
            AreaAggregate(
                university=univ,
                area=area,
                total_staff=math.fsum(cell.Add for cell in group),
                n_sectors=len(group),
                **values,
            )
        )
    return aggregates


def filter_small_universities(
    aggregates: Iterable[AreaAggregate], threshold: float = 5.0
) -> FilterResult:
    """Split rows on the staff threshold (strictly below is excluded).

    ``total_staff`` is the sum over the area's sectors of the
    university's period-average headcount, which is exactly the staff
    measure the exclusion rule is stated on.
    """
    if threshold <= 0:
        raise AggregateError(f"threshold must be positive, got {threshold}")
    kept = []
    excluded = []
    for agg in aggregates:
        if agg.total_staff < threshold:
            excluded.append(Exclusion(agg.university, agg.area, agg.total_staff))
        else:
            kept.append(agg)
    return FilterResult(kept=tuple(kept), excluded=tuple(excluded))


# ---------------------------------------------------------------------------
# Persistence (full precision; usable as a stage input)

AGGREGATES_HEADER = [
    "university", "area", "P", "FP", "QP", "FQP", "QI", "CI", "FCI", "DCI",
    "staff", "n_sectors", "excluded",
]


def _cell(value) -> str:
    return "" if value is None else repr(value)


def write_aggregates_csv(
    aggregates: Iterable[AreaAggregate], excluded: Iterable[Exclusion], path
) -> None:
    flagged = {(e.university, e.area) for e in excluded}
    rows = sorted(aggregates, key=lambda a: (a.university, a.area))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATES_HEADER)
        for agg in rows:
            writer.writerow(
                [agg.university, agg.area]
                + [_cell(getattr(agg, name)) for name in AREA_INDICATORS]
                + [repr(agg.total_staff), agg.n_sectors,
                   "true" if (agg.university, agg.area) in flagged else "false"]
            )


def read_aggregates_csv(path) -> FilterResult:
    kept = []
    excluded = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != AGGREGATES_HEADER:
            raise AggregateError(f"{path}: unexpected aggregates header {header}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(AGGREGATES_HEADER):
                raise AggregateError(f"{path}: malformed row {row}")
            values = {
                name: (None if cell == "" else float(cell))
                for name, cell in zip(AREA_INDICATORS, row[2:10])
            }
            agg = AreaAggregate(
                university=row[0],
                area=row[1],
                total_staff=float(row[10]),
                n_sectors=int(row[11]),
                **values,
            )
            if row[12] == "true":
                excluded.append(Exclusion(agg.university, agg.area, agg.total_staff))
            else:
                kept.append(agg)
    return FilterResult(kept=tuple(kept), excluded=tuple(excluded))
