"""Report tables: quality/collaboration cross-tab, area collaboration
profile, sector dispersion, top-collaborating sectors, and the
correlation tables of performance against collaboration intensity.

Builders are pure functions of their inputs; all rounding happens at
emission time (shares one decimal as percent, statistics and
concentration indices two decimals).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import stats
from .aggregate import AreaAggregate
from .corpus import Corpus, classify_collaboration
from .indicators import IndicatorRecord, compute_indicators, publications_by_sds, \
    sector_normalized_ifs

QUARTILE_LABELS = ("0-25", "26-50", "51-75", "76-100")  # worst -> best
COLLAB_COLUMNS = ("intramural", "extramural", "foreign", "enterprise")
PERFORMANCE_INDICATORS = ("P", "FP", "QP", "FQP", "QI")
COLLAB_METRICS = ("CI", "FCI", "DCI")

# Table-level metric names, with the legacy print-name alias
_METRIC_ALIASES = {"CI_IPR": "CI_DPR"}


class ReportError(Exception):
    pass


def resolve_metric(name: str) -> str:
    return _METRIC_ALIASES.get(name, name)


# ---------------------------------------------------------------------------
# Cross-tab (quality quartile x collaboration type)


@dataclass(frozen=True)
class CrossTab:
    """Publication counts by quality quartile and collaboration type.

    Rows are quartiles of the normalized impact factor, worst to best.
    The foreign and enterprise columns are subsets of the extramural
    column, so row totals are intramural + extramural only.
    """

    rows: tuple[str, ...]
    counts: Mapping[tuple[str, str], int]
    row_totals: Mapping[str, int]
    col_totals: Mapping[str, int]
    grand_total: int
    concentration: Mapping[tuple[str, str], float | None]

    @classmethod
    def from_counts(cls, counts_by_row: Sequence[Sequence[int]]) -> "CrossTab":
        """Build marginals and concentration indices from raw cell counts.

        ``counts_by_row`` holds one row per quartile (worst first) with
        counts (intramural, extramural, foreign, enterprise).
        """
        if len(counts_by_row) != len(QUARTILE_LABELS):
            raise ReportError(
                f"expected {len(QUARTILE_LABELS)} quartile rows, got {len(counts_by_row)}"
            )
        counts: dict[tuple[str, str], int] = {}
        for label, row in zip(QUARTILE_LABELS, counts_by_row):
            if len(row) != len(COLLAB_COLUMNS):
                raise ReportError(f"row '{label}' needs {len(COLLAB_COLUMNS)} counts")
            for col, value in zip(COLLAB_COLUMNS, row):
                if value < 0:
                    raise ReportError(f"negative count in cell ({label}, {col})")
                counts[(label, col)] = int(value)

        row_totals = {
            label: counts[(label, "intramural")] + counts[(label, "extramural")]
            for label in QUARTILE_LABELS
        }
        col_totals = {
            col: sum(counts[(label, col)] for label in QUARTILE_LABELS)
            for col in COLLAB_COLUMNS
        }
        grand_total = sum(row_totals.values())
        concentration = {
            (label, col): stats.concentration_index(
                counts[(label, col)], row_totals[label], col_totals[col], grand_total
            )
            if grand_total > 0 and row_totals[label] > 0
            else None
            for label in QUARTILE_LABELS
            for col in COLLAB_COLUMNS
        }
        table = cls(
            rows=QUARTILE_LABELS,
            counts=counts,
            row_totals=row_totals,
            col_totals=col_totals,
            grand_total=grand_total,
            concentration=concentration,
        )
        problems = table.marginal_problems()
        if problems:
            raise ReportError("; ".join(problems))
        return table

    def marginal_problems(self) -> list[str]:
        """Consistency violations of the table's marginals, if any."""
        problems = []
        for label in self.rows:
            intra = self.counts[(label, "intramural")]
            extra = self.counts[(label, "extramural")]
            if intra + extra != self.row_totals[label]:
                problems.append(f"row '{label}': intramural + extramural != total")
            for col in ("foreign", "enterprise"):
                if self.counts[(label, col)] > extra:
                    problems.append(f"row '{label}': {col} exceeds extramural")
        if sum(self.row_totals.values()) != self.grand_total:
            problems.append("row totals do not sum to grand total")
        if (
            self.col_totals["intramural"] + self.col_totals["extramural"]
            != self.grand_total
        ):
            problems.append("column totals do not sum to grand total")
        return problems


def _publication_nif(corpus: Corpus) -> dict[str, float]:
    """Normalized impact factor per publication, averaged over its sectors."""
    nif_by_sds = {
        sds: sector_normalized_ifs(corpus, sds, pubs)
        for sds, pubs in publications_by_sds(corpus).items()
    }
    values: dict[str, float] = {}
    for pub in corpus.publications:
        codes = sorted(pub.sds_codes())
        per_sector = [nif_by_sds[s][(pub.journal_id, pub.year)].value for s in codes]
        values[pub.pub_id] = math.fsum(per_sector) / len(per_sector)
    return values


def build_crosstab(corpus: Corpus, quartile_scope: str = "global") -> CrossTab:
    """Cross-tabulate publications by quality quartile and collaboration type.

    ``global`` pools every publication's normalized impact factor into
    one system-wide quartile split; ``per-sector`` bins each
    publication within its first attribution's sector.
    """
    if quartile_scope not in ("global", "per-sector"):
        raise ReportError(f"unknown quartile_scope '{quartile_scope}'")

    pubs = corpus.publications
    if quartile_scope == "global":
        values = _publication_nif(corpus)
        bins = stats.quartile_bins([values[p.pub_id] for p in pubs])
        bin_of = dict(zip((p.pub_id for p in pubs), bins))
    else:
        bin_of = {}
        for sds, sds_pubs in publications_by_sds(corpus).items():
            nif = sector_normalized_ifs(corpus, sds, sds_pubs)
            sector_values = [nif[(p.journal_id, p.year)].value for p in sds_pubs]
            if len(sector_values) < 4:
                raise ReportError(
                    f"sector '{sds}' has {len(sector_values)} publications; "
                    "per-sector quartiles need at least 4"
                )
            sector_bins = stats.quartile_bins(sector_values)
            for pub, b in zip(sds_pubs, sector_bins):
                if pub.attributions[0].sds == sds:
                    bin_of[pub.pub_id] = b

    matrix = [[0, 0, 0, 0] for _ in QUARTILE_LABELS]
    for pub in pubs:
        row = bin_of[pub.pub_id] - 1
        profile = classify_collaboration(pub, corpus.organizations)
        if not profile.is_extramural:
            matrix[row][0] += 1
            continue
        matrix[row][1] += 1
        if profile.has_foreign:
            matrix[row][2] += 1
        if profile.has_domestic_enterprise:
            matrix[row][3] += 1
    return CrossTab.from_counts(matrix)


# ---------------------------------------------------------------------------
# Area collaboration profile


@dataclass(frozen=True)
class AreaProfileRow:
    area: str
    output: int
    CI: float | None
    CI_UNI: float | None
    CI_DPR: float | None
    FCI: float | None
    DCI: float | None


def build_area_profile(corpus: Corpus, mode: str = "pooled") -> list[AreaProfileRow]:
    """Per-area output and collaboration shares.

    ``pooled`` counts each distinct publication of the area once and
    takes plain ratios; ``weighted`` averages the per-cell shares with
    period-average staff weights instead.
    """
    if mode == "pooled":
        return _area_profile_pooled(corpus)
    if mode == "weighted":
        return _area_profile_weighted(corpus)
    raise ReportError(f"unknown area profile mode '{mode}' (use pooled|weighted)")


def _area_profile_pooled(corpus: Corpus) -> list[AreaProfileRow]:
    counters = {
        area: {"output": 0, "CI": 0, "CI_UNI": 0, "CI_DPR": 0, "FCI": 0, "DCI": 0}
        for area in corpus.sectors.areas()
    }
    for pub in corpus.publications:
        profile = classify_collaboration(pub, corpus.organizations)
        pub_areas = {corpus.sectors.area_of(sds) for sds in pub.sds_codes()}
        for area in pub_areas:
            c = counters[area]
            c["output"] += 1
            if profile.is_extramural:
                c["CI"] += 1
            if len(profile.university_orgs) >= 2:
                c["CI_UNI"] += 1
            if profile.has_dpr:
                c["CI_DPR"] += 1
            if profile.has_foreign:
                c["FCI"] += 1
            if profile.has_domestic_enterprise:
                c["DCI"] += 1

    rows = []
    for area in corpus.sectors.areas():
        c = counters[area]
        n = c["output"]
        share = (lambda k: c[k] / n if n > 0 else None)
        rows.append(
            AreaProfileRow(
                area=area,
                output=n,
                CI=share("CI"),
                CI_UNI=share("CI_UNI"),
                CI_DPR=share("CI_DPR"),
                FCI=share("FCI"),
                DCI=share("DCI"),
            )
        )
    return rows


def _area_profile_weighted(corpus: Corpus) -> list[AreaProfileRow]:
    records = compute_indicators(corpus)
    pooled = _area_profile_pooled(corpus)  # output column stays pooled
    output_by_area = {row.area: row.output for row in pooled}

    metrics = {"CI": "CI_share", "CI_UNI": "CI_UNI", "CI_DPR": "CI_DPR",
               "FCI": "FCI", "DCI": "DCI"}
    rows = []
    for area in corpus.sectors.areas():
        area_records = [
            rec for rec in records if corpus.sectors.area_of(rec.sds) == area
        ]
        values: dict[str, float | None] = {}
        for name, attr in metrics.items():
            pairs = [
                (getattr(rec, attr), rec.staff)
                for rec in area_records
                if getattr(rec, attr) is not None
            ]
            weight_total = math.fsum(w for _v, w in pairs)
            if weight_total > 0:
                values[name] = math.fsum(v * w for v, w in pairs) / weight_total
            else:
                values[name] = None
        rows.append(AreaProfileRow(area=area, output=output_by_area[area], **values))
    return rows


# ---------------------------------------------------------------------------
# Sector-level pooled metrics (dispersion and top-sector tables)


def _pooled_sds_metric(
    records: Iterable[IndicatorRecord], metric: str
) -> dict[str, tuple[float, int]]:
    """Output-weighted pooled (value, output) of a share metric per sector."""
    attr = resolve_metric(metric)
    terms: dict[str, list[tuple[float, int]]] = {}
    for rec in records:
        value = getattr(rec, attr)
        if value is None:
            continue
        terms.setdefault(rec.sds, []).append((value, rec.O))
    pooled = {}
    for sds, pairs in terms.items():
        output = sum(o for _v, o in pairs)
        if output > 0:
            pooled[sds] = (math.fsum(v * o for v, o in pairs) / output, output)
    return pooled


@dataclass(frozen=True)
class DispersionRow:
    area: str
    n_sds: int
    summary: stats.Descriptives


def build_dispersion_table(
    records: list[IndicatorRecord],
    sectors,
    metric: str = "CI_share",
) -> tuple[list[DispersionRow], list[str]]:
    """Descriptive statistics of the sector-level pooled metric per area.

    Returns the rows plus warnings for areas with no sector values
    (those areas are omitted).
    """
    pooled = _pooled_sds_metric(records, metric)
    rows = []
    warnings = []
    for area in sectors.areas():
        values = [pooled[sds][0] for sds in sectors.sds_in_area(area) if sds in pooled]
        if not values:
            warnings.append(f"area '{area}' has no sectors with defined {metric}")
            continue
        rows.append(
            DispersionRow(area=area, n_sds=len(values), summary=stats.descriptive(values))
        )
    return rows, warnings


@dataclass(frozen=True)
class TopSectorRow:
    area: str
    sds: str
    value: float
    output: int
    area_share: float | None


def build_top_sector_table(
    records: list[IndicatorRecord],
    sectors,
    metric: str,
    top_n: int = 1,
) -> list[TopSectorRow]:
    """The top sectors of each area by a pooled share metric.

    Ties break toward larger output, then lexicographic sds code.
    """
    if top_n < 1:
        raise ReportError(f"top_n must be at least 1, got {top_n}")
    pooled = _pooled_sds_metric(records, metric)
    rows = []
    for area in sectors.areas():
        ranked = sorted(
            (
                (sds,) + pooled[sds]
                for sds in sectors.sds_in_area(area)
                if sds in pooled
            ),
            key=lambda item: (-item[1], -item[2], item[0]),
        )
        area_output = sum(output for _sds, _value, output in ranked)
        for sds, value, output in ranked[:top_n]:
            rows.append(
                TopSectorRow(
                    area=area,
                    sds=sds,
                    value=value,
                    output=output,
                    area_share=output / area_output if area_output > 0 else None,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# Correlation tables


@dataclass(frozen=True)
class CorrelationTable:
    """Association of performance indicators (Y) with one collaboration
    metric (X) across the universities of each area."""

    collab_metric: str
    areas: tuple[str, ...]
    cells: Mapping[tuple[str, str], stats.AssociationStats]  # (indicator, area)
    notes: Mapping[tuple[str, str], str]  # reasons for undefined cells


def build_correlation_table(
    aggregates: Iterable[AreaAggregate], collab_metric: str = "CI"
) -> CorrelationTable:
    """Correlate each performance indicator against a collaboration metric.

    The aggregates should already have exclusion applied.  Cells with
    fewer than 3 complete pairs or zero variance are undefined and the
    reason recorded.
    """
    if collab_metric not in COLLAB_METRICS:
        raise ReportError(f"unknown collaboration metric '{collab_metric}'")
    by_area: dict[str, list[AreaAggregate]] = {}
    for agg in aggregates:
        by_area.setdefault(agg.area, []).append(agg)

    cells: dict[tuple[str, str], stats.AssociationStats] = {}
    notes: dict[tuple[str, str], str] = {}
    for area in sorted(by_area):
        group = by_area[area]
        xs = [getattr(agg, collab_metric) for agg in group]
        for indicator in PERFORMANCE_INDICATORS:
            ys = [getattr(agg, indicator) for agg in group]
            pairs = stats.clean_pairs(xs, ys)
            if len(pairs) < 3:
                notes[(indicator, area)] = f"insufficient data (n={len(pairs)})"
                continue
            result = stats.associate(xs, ys)
            if result is None:
                notes[(indicator, area)] = "zero variance"
                continue
            cells[(indicator, area)] = result
    return CorrelationTable(
        collab_metric=collab_metric,
        areas=tuple(sorted(by_area)),
        cells=cells,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Emission

def _fmt_pct(value) -> str:
    return "" if value is None else f"{100.0 * value:.1f}"


def _fmt_stat(value) -> str:
    return "" if value is None else f"{value:.2f}"


def _write_rows(path, header: list[str], rows: Iterable[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_crosstab(table: CrossTab, path) -> None:
    header = ["quartile"]
    for col in COLLAB_COLUMNS:
        header += [col, f"{col}_cidx"]
    header.append("total")
    rows = []
    for label in table.rows:
        row = [label]
        for col in COLLAB_COLUMNS:
            row.append(table.counts[(label, col)])
            row.append(_fmt_stat(table.concentration[(label, col)]))
        row.append(table.row_totals[label])
        rows.append(row)
    total_row = ["total"]
    for col in COLLAB_COLUMNS:
        total_row += [table.col_totals[col], ""]
    total_row.append(table.grand_total)
    rows.append(total_row)
    _write_rows(path, header, rows)


def emit_area_profile(rows: list[AreaProfileRow], path) -> None:
    header = ["area", "output", "CI_pct", "CI_UNI_pct", "CI_DPR_pct", "FCI_pct", "DCI_pct"]
    _write_rows(
        path,
        header,
        [
            [r.area, r.output, _fmt_pct(r.CI), _fmt_pct(r.CI_UNI),
             _fmt_pct(r.CI_DPR), _fmt_pct(r.FCI), _fmt_pct(r.DCI)]
            for r in rows
        ],
    )


def emit_dispersion(rows: list[DispersionRow], path) -> None:
    header = ["area", "n_sds", "mean_pct", "median_pct", "min_pct", "max_pct",
              "std_pct", "cv"]
    _write_rows(
        path,
        header,
        [
            [r.area, r.n_sds, _fmt_pct(r.summary.mean), _fmt_pct(r.summary.median),
             _fmt_pct(r.summary.min), _fmt_pct(r.summary.max),
             _fmt_pct(r.summary.std), _fmt_stat(r.summary.cv)]
            for r in rows
        ],
    )


def emit_top_sectors(rows: list[TopSectorRow], metric: str, path) -> None:
    header = ["area", "sds", f"{metric.lower()}_pct", "output", "area_share_pct"]
    _write_rows(
        path,
        header,
        [
            [r.area, r.sds, _fmt_pct(r.value), r.output, _fmt_pct(r.area_share)]
            for r in rows
        ],
    )


def emit_correlation(table: CorrelationTable, path) -> None:
    header = ["area", "indicator", "n", "r", "beta", "r_squared", "note"]
    rows = []
    for area in table.areas:
        for indicator in PERFORMANCE_INDICATORS:
            cell = table.cells.get((indicator, area))
            if cell is None:
                rows.append([area, indicator, "", "", "", "",
                             table.notes.get((indicator, area), "undefined")])
            else:
                rows.append([
                    area, indicator, cell.n, _fmt_stat(cell.r),
                    _fmt_stat(cell.beta), _fmt_stat(cell.r_squared), "",
                ])
    _write_rows(path, header, rows)
