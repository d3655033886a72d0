import math

import pytest

from collabmetrics import stats
from collabmetrics.aggregate import (
    AreaAggregate,
    aggregate_area,
    filter_small_universities,
    normalize_to_sds_mean,
)
from collabmetrics.corpus import (
    Attribution,
    Corpus,
    Journal,
    Organization,
    OrgClass,
    Publication,
    SectorMap,
    StaffRoster,
)
from collabmetrics.indicators import compute_indicators
from collabmetrics.reports import (
    CrossTab,
    ReportError,
    build_area_profile,
    build_correlation_table,
    build_crosstab,
    build_dispersion_table,
    build_top_sector_table,
    emit_area_profile,
    emit_crosstab,
    resolve_metric,
)
from collabmetrics.synth import (
    PlantedAssociation,
    Propensities,
    SynthParams,
    generate_corpus,
)

# Published cross-tab: (intramural, extramural, foreign, enterprise) per
# quality quartile, with the concentration indices printed alongside.
PUBLISHED_COUNTS = [
    (2974, 4507, 1697, 221),
    (3830, 6443, 2612, 313),
    (4453, 10369, 4506, 419),
    (4754, 16090, 8413, 607),
]
PUBLISHED_CIDX = [
    (1.33, 0.86, 0.70, 1.01),
    (1.24, 0.90, 0.79, 1.04),
    (1.00, 1.00, 0.94, 0.97),
    (0.76, 1.10, 1.25, 1.00),
]
PUBLISHED_ROW_TOTALS = [7481, 10273, 14822, 20844]
PUBLISHED_GRAND_TOTAL = 53420


class TestCrossTabFromCounts:
    def test_reproduces_published_concentration_indices(self):
        table = CrossTab.from_counts(PUBLISHED_COUNTS)
        for label, expected_row in zip(table.rows, PUBLISHED_CIDX):
            for col, expected in zip(
                ("intramural", "extramural", "foreign", "enterprise"), expected_row
            ):
                assert table.concentration[(label, col)] == pytest.approx(
                    expected, abs=0.01
                ), (label, col)

    def test_published_marginals(self):
        table = CrossTab.from_counts(PUBLISHED_COUNTS)
        assert list(table.row_totals.values()) == PUBLISHED_ROW_TOTALS
        assert sum(PUBLISHED_ROW_TOTALS) == PUBLISHED_GRAND_TOTAL
        assert table.grand_total == PUBLISHED_GRAND_TOTAL
        assert table.marginal_problems() == []

    def test_inconsistent_subset_rejected(self):
        bad = [list(r) for r in PUBLISHED_COUNTS]
        bad[0][2] = bad[0][1] + 1  # foreign above extramural
        with pytest.raises(ReportError, match="exceeds extramural"):
            CrossTab.from_counts(bad)

    def test_column_weighted_concentration_mean_is_one(self):
        table = CrossTab.from_counts(PUBLISHED_COUNTS)
        for col in ("intramural", "extramural", "foreign", "enterprise"):
            mean = math.fsum(
                table.concentration[(label, col)]
                * table.row_totals[label]
                / table.grand_total
                for label in table.rows
            )
            assert mean == pytest.approx(1.0, abs=1e-9)


def intramural_corpus():
    journals = {f"J{i}": Journal(f"J{i}", {2001: float(i + 1)}) for i in range(8)}
    orgs = {"UA": Organization("UA", "University A", OrgClass.UNIV_DOMESTIC, "IT")}
    pubs = tuple(
        Publication(f"p{i}", 2001, f"J{i}", frozenset({"UA"}),
                    (Attribution("UA", "S1"),))
        for i in range(8)
    )
    return Corpus(
        publications=pubs,
        organizations=orgs,
        journals=journals,
        staff=StaffRoster(entries={("UA", "S1", 2001): 3}),
        sectors=SectorMap(entries={"S1": "A1"}),
        home_country="IT",
        period=(2001, 2003),
    )


class TestBuildCrossTab:
    def test_all_intramural_corpus(self):
        table = build_crosstab(intramural_corpus())
        assert table.col_totals["extramural"] == 0
        assert table.col_totals["intramural"] == table.grand_total == 8
        for label in table.rows:
            if table.row_totals[label] > 0:
                assert table.concentration[(label, "intramural")] == pytest.approx(1.0)
                assert table.concentration[(label, "extramural")] is None

    def test_independent_corpus_has_neutral_concentration(self):
        params = SynthParams(
            seed=101, n_universities=25, n_areas=4, sds_per_area=3,
            staff_range=(15, 35), pubs_per_staff_mean=1.6,
            collab_propensities=Propensities(
                other_university=0.25, dpr=0.2, enterprise=0.15, foreign=0.3
            ),
        )
        corpus = generate_corpus(params).corpus
        assert len(corpus.publications) >= 10_000
        table = build_crosstab(corpus)
        for value in table.concentration.values():
            assert value is not None
            assert value == pytest.approx(1.0, abs=0.1)

    def test_per_sector_scope_runs(self):
        corpus = generate_corpus(SynthParams(seed=5, n_universities=6)).corpus
        table = build_crosstab(corpus, quartile_scope="per-sector")
        assert table.grand_total == len(corpus.publications)

    def test_unknown_scope_rejected(self):
        with pytest.raises(ReportError):
            build_crosstab(intramural_corpus(), quartile_scope="weekly")


ORGS = {
    "UA": Organization("UA", "University A", OrgClass.UNIV_DOMESTIC, "IT"),
    "UB": Organization("UB", "University B", OrgClass.UNIV_DOMESTIC, "IT"),
    "F1": Organization("F1", "Foreign Lab", OrgClass.FOREIGN, "US"),
    "E1": Organization("E1", "Enterprise", OrgClass.ENTERPRISE_DOMESTIC, "IT"),
}


def profile_corpus():
    """10 publications in one area: 6 extramural, 3 of them foreign."""
    journals = {"J1": Journal("J1", {2001: 1.0})}
    pubs = []
    for i in range(10):
        if i < 3:
            orgs = {"UA", "F1"}
        elif i < 6:
            orgs = {"UA", "E1"}
        else:
            orgs = {"UA"}
        pubs.append(
            Publication(f"p{i}", 2001, "J1", frozenset(orgs),
                        (Attribution("UA", "S1"),))
        )
    return Corpus(
        publications=tuple(pubs),
        organizations=ORGS,
        journals=journals,
        staff=StaffRoster(entries={("UA", "S1", 2001): 6}),
        sectors=SectorMap(entries={"S1": "A1"}),
        home_country="IT",
        period=(2001, 2003),
    )


class TestAreaProfile:
    def test_single_organization_area_has_zero_shares(self):
        rows = build_area_profile(intramural_corpus())
        assert rows[0].CI == 0.0
        assert rows[0].FCI == 0.0

    def test_forced_ratios(self):
        rows = build_area_profile(profile_corpus())
        row = rows[0]
        assert row.output == 10
        assert row.CI == pytest.approx(0.6)
        assert row.FCI == pytest.approx(0.3)
        assert row.DCI == pytest.approx(0.3)
        assert row.CI_UNI == 0.0

    def test_planted_area_share_recovered(self):
        params = SynthParams(
            seed=202, n_universities=30, n_areas=2, sds_per_area=3,
            staff_range=(20, 40), pubs_per_staff_mean=2.0, collab_variation=0.1,
            area_propensity_overrides={
                "A01": Propensities(
                    other_university=0.2, dpr=0.15, enterprise=0.05, foreign=0.47
                )
            },
        )
        corpus = generate_corpus(params).corpus
        rows = {r.area: r for r in build_area_profile(corpus)}
        assert rows["A01"].output >= 5000
        assert rows["A01"].FCI == pytest.approx(0.47, abs=0.02)

    def test_weighted_mode_runs_and_stays_in_range(self):
        corpus = generate_corpus(SynthParams(seed=9, n_universities=8)).corpus
        for row in build_area_profile(corpus, mode="weighted"):
            for value in (row.CI, row.CI_UNI, row.CI_DPR, row.FCI, row.DCI):
                assert value is None or 0.0 <= value <= 1.0


class TestDispersion:
    def test_single_sector_area(self):
        corpus = profile_corpus()
        records = compute_indicators(corpus)
        rows, warnings = build_dispersion_table(records, corpus.sectors)
        assert warnings == []
        row = rows[0]
        assert row.n_sds == 1
        assert row.summary.mean == row.summary.median == row.summary.min == row.summary.max
        assert row.summary.std == 0.0

    def test_order_statistics(self):
        d = stats.descriptive([55.6, 70.0, 77.1])
        assert d.min == 55.6
        assert d.max == 77.1
        assert d.median == 70.0

    def test_published_physics_column_cv(self):
        # two-point series with the published mean and std of the physics area
        mean, std = 92.7, 5.1
        series = [mean - std / math.sqrt(2), mean + std / math.sqrt(2)]
        d = stats.descriptive(series)
        assert d.mean == pytest.approx(mean, abs=1e-9)
        assert d.std == pytest.approx(std, abs=1e-9)
        assert d.cv == pytest.approx(0.056, abs=0.002)

    def test_metric_alias_accepted(self):
        assert resolve_metric("CI_IPR") == "CI_DPR"
        corpus = profile_corpus()
        records = compute_indicators(corpus)
        via_alias, _ = build_dispersion_table(records, corpus.sectors, metric="CI_IPR")
        direct, _ = build_dispersion_table(records, corpus.sectors, metric="CI_DPR")
        assert via_alias == direct


class TestTopSectors:
    def test_single_sector_selected(self):
        corpus = profile_corpus()
        records = compute_indicators(corpus)
        rows = build_top_sector_table(records, corpus.sectors, "FCI")
        assert [(r.area, r.sds) for r in rows] == [("A1", "S1")]
        assert rows[0].area_share == pytest.approx(1.0)

    def test_argmax_by_metric(self):
        corpus = generate_corpus(SynthParams(seed=77, n_universities=6)).corpus
        records = compute_indicators(corpus)
        rows = build_top_sector_table(records, corpus.sectors, "FCI")
        pooled = {}
        for rec in records:
            if rec.FCI is None:
                continue
            w, o = pooled.get(rec.sds, (0.0, 0))
            pooled[rec.sds] = (w + rec.FCI * rec.O, o + rec.O)
        for row in rows:
            best = max(
                (v / o, o, s)
                for s, (v, o) in pooled.items()
                if corpus.sectors.area_of(s) == row.area and o > 0
            )[0]
            assert row.value == pytest.approx(best)

    def test_planted_top_sector_always_wins(self):
        hot = Propensities(other_university=0.2, dpr=0.15, enterprise=0.05, foreign=0.75)
        for seed in range(10):
            params = SynthParams(
                seed=seed, n_universities=10, n_areas=1, sds_per_area=4,
                sds_propensity_overrides={"A01S03": hot},
            )
            corpus = generate_corpus(params).corpus
            records = compute_indicators(corpus)
            rows = build_top_sector_table(records, corpus.sectors, "FCI")
            assert rows[0].sds == "A01S03", seed

    def test_top_n_expands_ranking(self):
        corpus = generate_corpus(SynthParams(seed=77, n_universities=6)).corpus
        records = compute_indicators(corpus)
        rows = build_top_sector_table(records, corpus.sectors, "DCI", top_n=3)
        by_area = {}
        for row in rows:
            by_area.setdefault(row.area, []).append(row.value)
        for values in by_area.values():
            assert values == sorted(values, reverse=True)

    def test_argmax_invariant_under_metric_rescaling(self):
        corpus = generate_corpus(SynthParams(seed=77, n_universities=6)).corpus
        records = compute_indicators(corpus)
        scaled = [
            type(r)(**{
                **{f: getattr(r, f) for f in r.__dataclass_fields__},
                "FCI": None if r.FCI is None else 0.25 * r.FCI,
            })
            for r in records
        ]
        base = build_top_sector_table(records, corpus.sectors, "FCI", top_n=2)
        rescaled = build_top_sector_table(scaled, corpus.sectors, "FCI", top_n=2)
        assert [(r.area, r.sds, r.output) for r in base] == \
            [(r.area, r.sds, r.output) for r in rescaled]


def make_aggregate(univ, ci, p):
    return AreaAggregate(
        university=univ, area="A1", P=p, FP=None, QP=None, FQP=None, QI=None,
        CI=ci, FCI=None, DCI=None, total_staff=10.0, n_sectors=1,
    )


class TestCorrelationTable:
    def test_exact_linear_relationship(self):
        aggs = [make_aggregate(f"U{i}", ci=0.1 * i, p=2.0 * 0.1 * i + 1.0)
                for i in range(6)]
        table = build_correlation_table(aggs, "CI")
        cell = table.cells[("P", "A1")]
        assert cell.r == pytest.approx(1.0, abs=1e-12)
        assert cell.r_squared == pytest.approx(1.0, abs=1e-12)
        assert cell.beta == pytest.approx(2.0, abs=1e-12)

    def test_two_universities_undefined(self):
        aggs = [make_aggregate("UA", 0.1, 1.0), make_aggregate("UB", 0.4, 2.0)]
        table = build_correlation_table(aggs, "CI")
        assert ("P", "A1") not in table.cells
        assert "insufficient data (n=2)" in table.notes[("P", "A1")]

    def test_r_squared_identity_holds_per_cell(self):
        corpus = generate_corpus(SynthParams(seed=3, n_universities=12)).corpus
        records = compute_indicators(corpus)
        aggs = aggregate_area(normalize_to_sds_mean(records).cells, corpus.sectors)
        kept = filter_small_universities(aggs).kept
        table = build_correlation_table(kept, "FCI")
        assert table.cells
        for cell in table.cells.values():
            assert abs(cell.r_squared - cell.r**2) < 1e-10

    def test_planted_correlation_recovered(self):
        for seed in range(5):
            params = SynthParams(
                seed=seed, n_universities=60, n_areas=2, sds_per_area=2,
                staff_range=(8, 20), pubs_per_staff_mean=1.5,
                planted_associations=(
                    PlantedAssociation("A01", "CI_share", "P", 0.68),
                ),
            )
            result = generate_corpus(params)
            assert result.ground_truth.planted_correlations[0]["r_driver"] == \
                pytest.approx(0.68, abs=0.02)
            corpus = result.corpus
            records = compute_indicators(corpus)
            aggs = aggregate_area(normalize_to_sds_mean(records).cells, corpus.sectors)
            kept = filter_small_universities(aggs).kept
            table = build_correlation_table(kept, "CI")
            assert table.cells[("P", "A01")].r == pytest.approx(0.68, abs=0.1)


class TestEmission:
    def test_crosstab_emission_is_deterministic_and_totals_print(self, tmp_path):
        table = CrossTab.from_counts(PUBLISHED_COUNTS)
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        emit_crosstab(table, first)
        emit_crosstab(table, second)
        assert first.read_bytes() == second.read_bytes()
        text = first.read_text(encoding="utf-8")
        assert "53420" in text.splitlines()[-1]
        assert "1.33" in text.splitlines()[1]

    def test_empty_table_emits_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_area_profile([], path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("area,")
