"""Per-cell indicator computation.

A cell is one (university, sds) pair.  Publications are counted once
per attributed cell; fractional counting divides a publication by its
number of distinct co-authoring organizations; quality weights are
journal impact factors rescaled so the publication-weighted mean over
each sector equals one.  Ratios that would divide by zero are carried
as ``None`` so downstream statistics can drop them instead of
absorbing spurious zeros.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

from .corpus import Corpus, Publication, SectorMap, classify_collaboration


class IndicatorError(Exception):
    """A precondition of indicator computation does not hold."""


@dataclass(frozen=True)
class NormalizedIF:
    """Impact factor of one (journal, year) rescaled to its sector mean."""

    journal_id: str
    sds: str
    year: int
    value: float


@dataclass(frozen=True)
class IndicatorRecord:
    """All survey-period indicator values of one (university, sds) cell."""

    university: str
    sds: str
    O: int
    FO: float
    SS: float
    FSS: float
    QI: float | None
    staff: float
    P: float | None
    FP: float | None
    QP: float | None
    FQP: float | None
    CI_ratio: float | None
    CI_share: float | None
    CI_UNI: float | None
    CI_DPR: float | None
    FCI: float | None
    DCI: float | None


INDICATOR_FIELDS = tuple(
    f.name for f in fields(IndicatorRecord) if f.name not in ("university", "sds")
)


def fractional_contribution(pub: Publication) -> float:
    """Reciprocal of the publication's distinct organization count."""
    if not pub.org_ids:
        raise IndicatorError(f"publication '{pub.pub_id}' has no organizations")
    return 1.0 / len(pub.org_ids)


def publications_by_sds(corpus: Corpus) -> dict[str, list[Publication]]:
    """Publications of each sector (a publication once per sector it credits)."""
    out: dict[str, list[Publication]] = {}
    for pub in corpus.publications:
        for sds in sorted(pub.sds_codes()):
            out.setdefault(sds, []).append(pub)
    return out


def _raw_impact(corpus: Corpus, pub: Publication) -> float:
    journal = corpus.journals.get(pub.journal_id)
    if journal is None:
        raise IndicatorError(
            f"publication '{pub.pub_id}': dangling journal '{pub.journal_id}'"
        )
    impact = journal.impact_factor_by_year.get(pub.year)
    if impact is None:
        raise IndicatorError(
            f"missing impact factor for journal '{pub.journal_id}' year {pub.year}"
        )
    return impact


def sector_normalized_ifs(
    corpus: Corpus, sds: str, pubs: list[Publication]
) -> dict[tuple[str, int], NormalizedIF]:
    """Normalized impact factors for an explicit sector publication pool."""
    if not pubs:
        return {}
    raws = [_raw_impact(corpus, p) for p in pubs]
    # exact summation keeps the result independent of publication order
    mean = math.fsum(raws) / len(raws)
    if mean == 0.0:
        raise IndicatorError(
            f"sector '{sds}': all impact factors are zero, normalization undefined"
        )
    out: dict[tuple[str, int], NormalizedIF] = {}
    for pub, raw in zip(pubs, raws):
        key = (pub.journal_id, pub.year)
        if key not in out:
            out[key] = NormalizedIF(pub.journal_id, sds, pub.year, raw / mean)
    return out


def normalized_impact_factor(
    corpus: Corpus, sds: str
) -> dict[tuple[str, int], NormalizedIF]:
    """Sector-normalized impact factor per (journal, year) used in the sector.

    Values divide the raw impact factor by the publication-weighted
    sector mean, so the mean normalized value over the sector's
    publications is one.  Empty sectors yield an empty map.
    """
    pubs = [p for p in corpus.publications if sds in p.sds_codes()]
    return sector_normalized_ifs(corpus, sds, pubs)


def compute_indicators(corpus: Corpus) -> list[IndicatorRecord]:
    """One IndicatorRecord per (university, sds) cell of the corpus.

    Cells exist for every pair with at least one attributed publication
    or one roster entry.  Summation follows publication input order, so
    results do not depend on any scheduling.
    """
    cells: dict[tuple[str, str], list[Publication]] = {}
    for pub in corpus.publications:
        for att in pub.attributions:
            cells.setdefault((att.university, att.sds), []).append(pub)
    for univ, sds in corpus.staff.pairs():
        cells.setdefault((univ, sds), [])

    nif_by_sds = {
        sds: sector_normalized_ifs(corpus, sds, pubs)
        for sds, pubs in publications_by_sds(corpus).items()
    }
    profiles = {
        pub.pub_id: classify_collaboration(pub, corpus.organizations)
        for pub in corpus.publications
    }

    records: list[IndicatorRecord] = []
    for (univ, sds) in sorted(cells):
        pubs = cells[(univ, sds)]
        nif = nif_by_sds.get(sds, {})

        output = len(pubs)
        fo_terms = []
        ss_terms = []
        fss_terms = []
        n_extramural = 0
        n_other_univ = 0
        n_dpr = 0
        n_foreign = 0
        n_enterprise = 0
        for pub in pubs:
            frac = fractional_contribution(pub)
            value = nif[(pub.journal_id, pub.year)].value
            fo_terms.append(frac)
            ss_terms.append(value)
            fss_terms.append(value * frac)
            profile = profiles[pub.pub_id]
            if profile.is_extramural:
                n_extramural += 1
            if profile.has_other_domestic_university(univ):
                n_other_univ += 1
            if profile.has_dpr:
                n_dpr += 1
            if profile.has_foreign:
                n_foreign += 1
            if profile.has_domestic_enterprise:
                n_enterprise += 1

        # exact sums: records are identical under publication reordering
        fo = math.fsum(fo_terms)
        ss = math.fsum(ss_terms)
        fss = math.fsum(fss_terms)
        staff = corpus.staff.period_average(univ, sds, corpus.period)
        if staff > 0:
            p, fp, qp, fqp = output / staff, fo / staff, ss / staff, fss / staff
        else:
            p = fp = qp = fqp = None

        records.append(
            IndicatorRecord(
                university=univ,
                sds=sds,
                O=output,
                FO=fo,
                SS=ss,
                FSS=fss,
                QI=ss / output if output > 0 else None,
                staff=staff,
                P=p,
                FP=fp,
                QP=qp,
                FQP=fqp,
                CI_ratio=output / fo if fo > 0 else None,
                CI_share=n_extramural / output if output > 0 else None,
                CI_UNI=n_other_univ / output if output > 0 else None,
                CI_DPR=n_dpr / output if output > 0 else None,
                FCI=n_foreign / output if output > 0 else None,
                DCI=n_enterprise / output if output > 0 else None,
            )
        )
    return records


# ---------------------------------------------------------------------------
# Persistence (full precision; usable as a stage input)

INDICATORS_HEADER = [
    "university", "sds", "area", "O", "FO", "SS", "FSS", "QI", "staff",
    "P", "FP", "QP", "FQP", "CI_ratio", "CI_share", "CI_UNI", "CI_DPR",
    "FCI", "DCI",
]

_VALUE_COLUMNS = INDICATORS_HEADER[3:]


def _cell(value) -> str:
    if value is None:
        return ""
    return repr(value)


def write_indicators_csv(records: list[IndicatorRecord], sectors: SectorMap, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(INDICATORS_HEADER)
        for rec in records:
            row = [rec.university, rec.sds, sectors.area_of(rec.sds)]
            row.extend(_cell(getattr(rec, name)) for name in _VALUE_COLUMNS)
            writer.writerow(row)


def read_indicators_csv(path) -> tuple[list[IndicatorRecord], SectorMap]:
    """Parse a persisted indicators table back into records plus sector map."""
    records: list[IndicatorRecord] = []
    sector_entries: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != INDICATORS_HEADER:
            raise IndicatorError(f"{path}: unexpected indicators header {header}")
        for row in reader:
            if not row:
                continue
            if len(row) != len(INDICATORS_HEADER):
                raise IndicatorError(f"{path}: malformed row {row}")
            univ, sds, area = row[0], row[1], row[2]
            known = sector_entries.setdefault(sds, area)
            if known != area:
                raise IndicatorError(
                    f"{path}: sds '{sds}' mapped to both '{known}' and '{area}'"
                )
            values: dict[str, float | int | None] = {}
            for name, cell in zip(_VALUE_COLUMNS, row[3:]):
                if cell == "":
                    values[name] = None
                elif name == "O":
                    values[name] = int(cell)
                else:
                    values[name] = float(cell)
            records.append(IndicatorRecord(university=univ, sds=sds, **values))
    return records, SectorMap(entries=sector_entries)
