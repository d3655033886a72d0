"""Corpus model and I/O: publications, organizations, journals, staff, sectors.

The loaders are strict about file shape (they fail fast with file/line
context); referential consistency is checked separately by
``validate_corpus`` so that broken corpora can still be inspected.
A loaded ``Corpus`` is immutable and safe to share across threads.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping


class CorpusError(Exception):
    """Base class for corpus construction and consistency failures."""


class CorpusLoadError(CorpusError):
    """A malformed input file; carries file, line and field context."""

    def __init__(self, path, line: int | None, message: str, field: str | None = None):
        self.path = str(path)
        self.line = line
        self.field = field
        where = self.path if line is None else f"{self.path}:{line}"
        if field:
            message = f"field '{field}': {message}"
        super().__init__(f"{where}: {message}")


class CorpusValidationError(CorpusError):
    """Raised when a checked load finds referential errors."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        lines = [issue.describe() for issue in report.errors]
        super().__init__(
            "corpus failed validation with "
            f"{len(report.errors)} error(s):\n" + "\n".join(lines)
        )


class OrgClass(str, enum.Enum):
    UNIV_DOMESTIC = "UNIV_DOMESTIC"
    DPR_DOMESTIC = "DPR_DOMESTIC"
    ENTERPRISE_DOMESTIC = "ENTERPRISE_DOMESTIC"
    FOREIGN = "FOREIGN"


@dataclass(frozen=True)
class Organization:
    org_id: str
    name: str
    org_class: OrgClass
    country: str


@dataclass(frozen=True)
class Journal:
    journal_id: str
    impact_factor_by_year: Mapping[int, float]


@dataclass(frozen=True)
class Attribution:
    """One (university, sector) credit line of a publication."""

    university: str
    sds: str


@dataclass(frozen=True)
class Publication:
    pub_id: str
    year: int
    journal_id: str
    org_ids: frozenset[str]
    attributions: tuple[Attribution, ...]

    def sds_codes(self) -> set[str]:
        return {a.sds for a in self.attributions}

    def universities(self) -> set[str]:
        return {a.university for a in self.attributions}


@dataclass(frozen=True)
class StaffRoster:
    """Headcounts keyed by (university, sds, year), as of 31 Dec of year-1."""

    entries: Mapping[tuple[str, str, int], int]

    def period_average(self, university: str, sds: str, period: tuple[int, int]) -> float:
        """Mean yearly headcount over the period; missing years count as 0."""
        years = range(period[0], period[1] + 1)
        total = sum(self.entries.get((university, sds, y), 0) for y in years)
        return total / len(years)

    def pairs(self) -> set[tuple[str, str]]:
        return {(u, s) for (u, s, _y) in self.entries}


@dataclass(frozen=True)
class SectorMap:
    """Assignment of disciplinary sectors (SDS) to macro areas."""

    entries: Mapping[str, str]

    def area_of(self, sds: str) -> str:
        try:
            return self.entries[sds]
        except KeyError:
            raise CorpusError(f"sds '{sds}' is not mapped to any area") from None

    def areas(self) -> list[str]:
        return sorted(set(self.entries.values()))

    def sds_in_area(self, area: str) -> list[str]:
        return sorted(s for s, a in self.entries.items() if a == area)


@dataclass(frozen=True)
class Corpus:
    publications: tuple[Publication, ...]
    organizations: Mapping[str, Organization]
    journals: Mapping[str, Journal]
    staff: StaffRoster
    sectors: SectorMap
    home_country: str
    period: tuple[int, int]

    def years(self) -> range:
        return range(self.period[0], self.period[1] + 1)


@dataclass(frozen=True)
class CorpusConfig:
    home_country: str = "IT"
    period: tuple[int, int] = (2001, 2003)

    def __post_init__(self):
        if self.period[0] > self.period[1]:
            raise ValueError(f"empty period {self.period}")


@dataclass(frozen=True)
class CollabProfile:
    """Collaboration classification of one publication.

    Class flags are viewpoint-free except university co-authorship,
    which only makes sense relative to one attributed university and is
    therefore exposed as a method.
    """

    is_extramural: bool
    has_dpr: bool
    has_foreign: bool
    has_domestic_enterprise: bool
    university_orgs: frozenset[str]

    def has_other_domestic_university(self, university: str) -> bool:
        return any(u != university for u in self.university_orgs)


def classify_collaboration(
    pub: Publication, organizations: Mapping[str, Organization]
) -> CollabProfile:
    """Collaboration flags of a publication against an organization registry."""
    classes = []
    university_orgs = []
    for oid in pub.org_ids:
        org = organizations.get(oid)
        if org is None:
            raise CorpusError(
                f"publication '{pub.pub_id}': unknown organization '{oid}'"
            )
        classes.append(org.org_class)
        if org.org_class is OrgClass.UNIV_DOMESTIC:
            university_orgs.append(oid)
    return CollabProfile(
        is_extramural=len(pub.org_ids) >= 2,
        has_dpr=OrgClass.DPR_DOMESTIC in classes,
        has_foreign=OrgClass.FOREIGN in classes,
        has_domestic_enterprise=OrgClass.ENTERPRISE_DOMESTIC in classes,
        university_orgs=frozenset(university_orgs),
    )


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    location: str
    message: str

    def describe(self) -> str:
        return f"[{self.severity}] {self.location}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Check every cross-reference and registry invariant of a corpus.

    Dangling references are aggregated one issue per missing id (with a
    reference count) so one broken registry row yields one error.
    """
    issues: list[ValidationIssue] = []

    def error(location: str, message: str):
        issues.append(ValidationIssue("error", location, message))

    def warning(location: str, message: str):
        issues.append(ValidationIssue("warning", location, message))

    period = corpus.period

    for org in corpus.organizations.values():
        is_foreign = org.org_class is OrgClass.FOREIGN
        if is_foreign != (org.country != corpus.home_country):
            error(
                f"organizations[{org.org_id}]",
                f"class {org.org_class.value} inconsistent with country "
                f"'{org.country}' (home country '{corpus.home_country}')",
            )

    for journal in corpus.journals.values():
        if not journal.impact_factor_by_year:
            error(f"journals[{journal.journal_id}]", "no impact factor years")
        for year, impact in journal.impact_factor_by_year.items():
            if impact < 0:
                error(
                    f"journals[{journal.journal_id}]",
                    f"negative impact factor {impact} for year {year}",
                )

    for (univ, sds, year), headcount in corpus.staff.entries.items():
        loc = f"staff[{univ},{sds},{year}]"
        if not isinstance(headcount, int) or headcount < 0:
            error(loc, f"headcount must be a non-negative integer, got {headcount!r}")
        if not period[0] <= year <= period[1]:
            error(loc, f"year {year} outside period {period[0]}-{period[1]}")

    missing_journals: dict[str, int] = {}
    missing_orgs: dict[str, int] = {}
    missing_sds: dict[str, int] = {}
    missing_if: dict[tuple[str, int], int] = {}
    missing_universities: dict[str, int] = {}
    unrostered: dict[tuple[str, str], int] = {}
    seen_pub_ids: set[str] = set()
    roster_pairs = corpus.staff.pairs()

    for (_u, sds, _y) in corpus.staff.entries:
        if sds not in corpus.sectors.entries:
            missing_sds[sds] = missing_sds.get(sds, 0) + 1

    for pub in corpus.publications:
        loc = f"publications[{pub.pub_id}]"
        if pub.pub_id in seen_pub_ids:
            error(loc, "duplicate publication id")
        seen_pub_ids.add(pub.pub_id)
        if not pub.org_ids:
            error(loc, "empty organization set")
        if not pub.attributions:
            error(loc, "empty attribution list")
        if not period[0] <= pub.year <= period[1]:
            error(loc, f"year {pub.year} outside period {period[0]}-{period[1]}")

        journal = corpus.journals.get(pub.journal_id)
        if journal is None:
            missing_journals[pub.journal_id] = missing_journals.get(pub.journal_id, 0) + 1
        elif pub.year not in journal.impact_factor_by_year:
            key = (pub.journal_id, pub.year)
            missing_if[key] = missing_if.get(key, 0) + 1

        for oid in sorted(pub.org_ids):
            if oid not in corpus.organizations:
                missing_orgs[oid] = missing_orgs.get(oid, 0) + 1

        seen_pairs = set()
        for att in pub.attributions:
            if (att.university, att.sds) in seen_pairs:
                error(loc, f"duplicate attribution ({att.university}, {att.sds})")
            seen_pairs.add((att.university, att.sds))
            org = corpus.organizations.get(att.university)
            if org is None:
                missing_universities[att.university] = (
                    missing_universities.get(att.university, 0) + 1
                )
            elif org.org_class is not OrgClass.UNIV_DOMESTIC:
                error(
                    loc,
                    f"attributed university '{att.university}' has class "
                    f"{org.org_class.value}",
                )
            if att.university not in pub.org_ids:
                error(
                    loc,
                    f"attributed university '{att.university}' missing from "
                    "organization set",
                )
            if att.sds not in corpus.sectors.entries:
                missing_sds[att.sds] = missing_sds.get(att.sds, 0) + 1
            elif (att.university, att.sds) not in roster_pairs:
                key = (att.university, att.sds)
                unrostered[key] = unrostered.get(key, 0) + 1

    for jid, count in sorted(missing_journals.items()):
        error(f"journals[{jid}]", f"dangling journal_id referenced by {count} publication(s)")
    for oid, count in sorted(missing_orgs.items()):
        error(f"organizations[{oid}]", f"dangling org_id referenced by {count} publication(s)")
    for uid, count in sorted(missing_universities.items()):
        error(
            f"organizations[{uid}]",
            f"dangling university id in {count} attribution(s)",
        )
    for sds, count in sorted(missing_sds.items()):
        error(f"sectors[{sds}]", f"dangling sds referenced by {count} record(s)")
    for (jid, year), count in sorted(missing_if.items()):
        error(
            f"journals[{jid}]",
            f"missing impact factor for year {year} ({count} publication(s))",
        )
    for (univ, sds), count in sorted(unrostered.items()):
        warning(
            f"staff[{univ},{sds}]",
            f"attribution without roster entry ({count} publication(s))",
        )

    return ValidationReport(issues=tuple(issues))


# ---------------------------------------------------------------------------
# Loading

PUBLICATION_FIELDS = ("id", "year", "journal", "orgs", "attributions")
ORG_HEADER = ["org_id", "name", "class", "country"]
JOURNAL_HEADER = ["journal_id", "year", "impact_factor"]
STAFF_HEADER = ["university", "sds", "year", "headcount"]
SECTOR_HEADER = ["sds", "area"]


def _read_csv(path, expected_header: list[str]):
    """Yield (line_number, row) for a strict-header CSV file."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusLoadError(path, 1, "missing header row") from None
        if header != expected_header:
            raise CorpusLoadError(
                path, 1, f"expected header {','.join(expected_header)}, got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise CorpusLoadError(
                    path, lineno, f"expected {len(expected_header)} fields, got {len(row)}"
                )
            yield lineno, row


def _parse_int(path, lineno, field_name, raw) -> int:
    try:
        return int(raw)
    except ValueError:
        raise CorpusLoadError(path, lineno, f"not an integer: {raw!r}", field_name) from None


def load_organizations(path, home_country: str) -> dict[str, Organization]:
    orgs: dict[str, Organization] = {}
    for lineno, (org_id, name, raw_class, country) in _read_csv(path, ORG_HEADER):
        if not org_id:
            raise CorpusLoadError(path, lineno, "empty org_id", "org_id")
        if org_id in orgs:
            raise CorpusLoadError(path, lineno, f"duplicate org_id '{org_id}'", "org_id")
        try:
            org_class = OrgClass(raw_class)
        except ValueError:
            raise CorpusLoadError(
                path, lineno, f"unknown organization class {raw_class!r}", "class"
            ) from None
        is_foreign = org_class is OrgClass.FOREIGN
        if is_foreign != (country != home_country):
            raise CorpusLoadError(
                path,
                lineno,
                f"class {org_class.value} inconsistent with country '{country}' "
                f"(home country '{home_country}')",
                "class",
            )
        orgs[org_id] = Organization(org_id, name, org_class, country)
    return orgs


def load_journals(path) -> dict[str, Journal]:
    by_journal: dict[str, dict[int, float]] = {}
    for lineno, (journal_id, raw_year, raw_if) in _read_csv(path, JOURNAL_HEADER):
        if not journal_id:
            raise CorpusLoadError(path, lineno, "empty journal_id", "journal_id")
        year = _parse_int(path, lineno, "year", raw_year)
        try:
            impact = float(raw_if)
        except ValueError:
            raise CorpusLoadError(
                path, lineno, f"not a number: {raw_if!r}", "impact_factor"
            ) from None
        if impact < 0:
            raise CorpusLoadError(
                path, lineno, f"negative impact factor {impact}", "impact_factor"
            )
        years = by_journal.setdefault(journal_id, {})
        if year in years:
            raise CorpusLoadError(
                path, lineno, f"duplicate row for journal '{journal_id}' year {year}"
            )
        years[year] = impact
    return {jid: Journal(jid, years) for jid, years in by_journal.items()}


def load_staff(path, period: tuple[int, int]) -> StaffRoster:
    entries: dict[tuple[str, str, int], int] = {}
    for lineno, (university, sds, raw_year, raw_head) in _read_csv(path, STAFF_HEADER):
        year = _parse_int(path, lineno, "year", raw_year)
        if not period[0] <= year <= period[1]:
            raise CorpusLoadError(
                path, lineno, f"year {year} outside period {period[0]}-{period[1]}", "year"
            )
        headcount = _parse_int(path, lineno, "headcount", raw_head)
        if headcount < 0:
            raise CorpusLoadError(
                path, lineno, f"negative headcount {headcount}", "headcount"
            )
        key = (university, sds, year)
        if key in entries:
            raise CorpusLoadError(
                path, lineno, f"duplicate staff row for {university}/{sds}/{year}"
            )
        entries[key] = headcount
    return StaffRoster(entries=entries)


def load_sectors(path) -> SectorMap:
    entries: dict[str, str] = {}
    for lineno, (sds, area) in _read_csv(path, SECTOR_HEADER):
        if not sds:
            raise CorpusLoadError(path, lineno, "empty sds", "sds")
        if sds in entries:
            raise CorpusLoadError(path, lineno, f"duplicate sds '{sds}'", "sds")
        entries[sds] = area
    return SectorMap(entries=entries)


def load_publications(path, period: tuple[int, int]) -> tuple[Publication, ...]:
    pubs: list[Publication] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusLoadError(path, lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise CorpusLoadError(path, lineno, "expected a JSON object")
            for key in PUBLICATION_FIELDS:
                if key not in obj:
                    raise CorpusLoadError(path, lineno, "missing field", key)

            pub_id = obj["id"]
            if not isinstance(pub_id, str) or not pub_id:
                raise CorpusLoadError(path, lineno, "must be a non-empty string", "id")
            if pub_id in seen_ids:
                raise CorpusLoadError(path, lineno, f"duplicate publication id '{pub_id}'", "id")
            seen_ids.add(pub_id)

            year = obj["year"]
            if isinstance(year, bool) or not isinstance(year, int):
                raise CorpusLoadError(path, lineno, "must be an integer", "year")
            if not period[0] <= year <= period[1]:
                raise CorpusLoadError(
                    path, lineno, f"year {year} outside period {period[0]}-{period[1]}", "year"
                )

            journal = obj["journal"]
            if not isinstance(journal, str) or not journal:
                raise CorpusLoadError(path, lineno, "must be a non-empty string", "journal")

            orgs = obj["orgs"]
            if not isinstance(orgs, list) or not all(isinstance(o, str) for o in orgs):
                raise CorpusLoadError(path, lineno, "must be a list of strings", "orgs")
            if not orgs:
                raise CorpusLoadError(path, lineno, "empty organization set", "orgs")
            if len(set(orgs)) != len(orgs):
                raise CorpusLoadError(path, lineno, "duplicate organization ids", "orgs")

            raw_atts = obj["attributions"]
            if not isinstance(raw_atts, list) or not raw_atts:
                raise CorpusLoadError(
                    path, lineno, "must be a non-empty list", "attributions"
                )
            attributions = []
            seen_pairs = set()
            for raw in raw_atts:
                if (
                    not isinstance(raw, dict)
                    or not isinstance(raw.get("university"), str)
                    or not isinstance(raw.get("sds"), str)
                ):
                    raise CorpusLoadError(
                        path,
                        lineno,
                        "each attribution needs string fields 'university' and 'sds'",
                        "attributions",
                    )
                pair = (raw["university"], raw["sds"])
                if pair in seen_pairs:
                    raise CorpusLoadError(
                        path, lineno, f"duplicate attribution {pair}", "attributions"
                    )
                seen_pairs.add(pair)
                attributions.append(Attribution(university=pair[0], sds=pair[1]))

            pubs.append(
                Publication(
                    pub_id=pub_id,
                    year=year,
                    journal_id=journal,
                    org_ids=frozenset(orgs),
                    attributions=tuple(attributions),
                )
            )
    return tuple(pubs)


def load_corpus(
    pub_path,
    org_path,
    journal_path,
    staff_path,
    sector_path,
    config: CorpusConfig = CorpusConfig(),
    *,
    check: bool = True,
) -> Corpus:
    """Load and cross-link the five input files into a Corpus.

    With ``check`` (the default) the corpus is validated and a
    ``CorpusValidationError`` raised on any referential error; with
    ``check=False`` the possibly-inconsistent corpus is returned for
    inspection via ``validate_corpus``.
    """
    corpus = Corpus(
        publications=load_publications(pub_path, config.period),
        organizations=load_organizations(org_path, config.home_country),
        journals=load_journals(journal_path),
        staff=load_staff(staff_path, config.period),
        sectors=load_sectors(sector_path),
        home_country=config.home_country,
        period=config.period,
    )
    if check:
        report = validate_corpus(corpus)
        if not report.ok:
            raise CorpusValidationError(report)
    return corpus


# ---------------------------------------------------------------------------
# Writing (canonical forms; loading then re-writing is byte-stable)

CORPUS_FILENAMES = {
    "publications": "publications.jsonl",
    "organizations": "organizations.csv",
    "journals": "journals.csv",
    "staff": "staff.csv",
    "sectors": "sectors.csv",
}


def _write_csv(path, header: list[str], rows: Iterable[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_corpus(corpus: Corpus, out_dir) -> dict[str, Path]:
    """Write the five corpus files in canonical order; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {key: out / name for key, name in CORPUS_FILENAMES.items()}

    with open(paths["publications"], "w", encoding="utf-8", newline="") as fh:
        for pub in corpus.publications:
            fh.write(
                json.dumps(
                    {
                        "id": pub.pub_id,
                        "year": pub.year,
                        "journal": pub.journal_id,
                        "orgs": sorted(pub.org_ids),
                        "attributions": [
                            {"university": a.university, "sds": a.sds}
                            for a in pub.attributions
                        ],
                    }
                )
                + "\n"
            )

    _write_csv(
        paths["organizations"],
        ORG_HEADER,
        [
            [org.org_id, org.name, org.org_class.value, org.country]
            for org in sorted(corpus.organizations.values(), key=lambda o: o.org_id)
        ],
    )
    _write_csv(
        paths["journals"],
        JOURNAL_HEADER,
        [
            [jid, year, repr(impact)]
            for jid in sorted(corpus.journals)
            for year, impact in sorted(corpus.journals[jid].impact_factor_by_year.items())
        ],
    )
    _write_csv(
        paths["staff"],
        STAFF_HEADER,
        [
            [univ, sds, year, head]
            for (univ, sds, year), head in sorted(corpus.staff.entries.items())
        ],
    )
    _write_csv(
        paths["sectors"],
        SECTOR_HEADER,
        [[sds, area] for sds, area in sorted(corpus.sectors.entries.items())],
    )
    return paths
