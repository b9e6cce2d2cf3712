import math
import random

import pytest

from controlpower.dataset import (
    DataError,
    FirmYearRecord,
    GroupKey,
    MomentTarget,
    SynthConfig,
    apply_sample_filter,
    synth_registry,
)
from controlpower.evolution import ControlPowerPdf, ideal_wave, wave_eval
from controlpower.pipeline import (
    PipelineConfig,
    Report,
    YearStats,
    build_report,
    emit_report,
    run_pipeline,
    year_stats,
    year_stats_from_draws,
)
from controlpower.power_index import make_game

MAIN_PRIVATE = GroupKey("main", "private")


def record(firm_id, shares, year=2001, board="main", ownership="private", meeting_share=None):
    return FirmYearRecord(
        firm_id=firm_id,
        year=year,
        board=board,
        ownership=ownership,
        shares=tuple(shares),
        meeting_share=meeting_share,
    )


def registry_config(**overrides):
    base = dict(
        years=tuple(range(2000, 2012)),
        firms_per_year=60,
        seed=21,
        top1=MomentTarget(0.30, 0.10),
        top2_10=MomentTarget(0.27, 0.12),
    )
    base.update(overrides)
    return SynthConfig(**base)


class TestYearStats:
    def test_dictator_firm(self):
        stats = year_stats([record("f1", (0.40, 0.10, 0.10))])
        assert stats.r_spi_1 == 1.0
        assert stats.n_spi_lt1 == 0
        assert stats.spi_lt1_mean is None

    def test_symmetric_firm(self):
        stats = year_stats([record("f1", (0.20, 0.20, 0.20))])
        assert stats.r_spi_1 == 0.0
        assert stats.spi_lt1_mean == pytest.approx(1 / 3)
        assert stats.spi_lt1_sd is None  # single firm below full power

    def test_share_means(self):
        stats = year_stats([
            record("f1", (0.40, 0.10)),
            record("f2", (0.20, 0.15, 0.05)),
        ])
        assert stats.m_top1 == pytest.approx(0.30)
        assert stats.m_top2_10 == pytest.approx(0.15)
        assert stats.n_sample == 2

    def test_meeting_ratio_fields(self):
        recs = [
            record("f1", (0.30, 0.10), meeting_share=0.36),
            record("f2", (0.30, 0.10), meeting_share=0.32),
            record("f3", (0.30, 0.10)),  # no meeting data, excluded from ratios
        ]
        stats = year_stats(recs)
        assert stats.n_meeting == 2
        assert stats.meeting_ratio_mean == pytest.approx((0.9 + 0.8) / 2)
        assert stats.band_count_ratio == 1.0

    def test_rejects_mixed_cells(self):
        with pytest.raises(ValueError):
            year_stats([record("f1", (0.3,)), record("f2", (0.3,), year=2002)])
        with pytest.raises(ValueError):
            year_stats([])

    def test_top11_requires_meeting_share(self):
        with pytest.raises(DataError):
            year_stats([record("f1", (0.3, 0.1))], spi_mode="top11")

    def test_dictatorship_equivalence_property(self):
        # headline ratio must equal the brute-force dictator count
        rng = random.Random(37)
        recs = []
        for i in range(120):
            top1 = rng.uniform(0.05, 0.49)
            rest = sorted((rng.uniform(0.0, top1) for _ in range(rng.randint(1, 9))), reverse=True)
            scale = min(1.0, (1.0 - top1) / (sum(rest) + 1e-12), 1.0)
            rest = [r * scale * 0.999 for r in rest]
            recs.append(record(f"f{i}", [top1] + rest))
        recs = apply_sample_filter(recs)
        stats = year_stats(recs)
        dictators = 0
        for r in recs:
            game = make_game(r.shares)
            dictators += game.int_weights[0] > sum(game.int_weights[1:])
        assert stats.r_spi_1 == pytest.approx(dictators / len(recs), abs=1e-12)

    def test_calibrated_cohort_full_power_ratio(self):
        # cohort drawn at the 1996 share moments; the contested-sample
        # full-power ratio should land near the observed 0.644
        config = SynthConfig(
            years=(1996,),
            firms_per_year=1000,
            seed=1996,
            top1=MomentTarget(0.316, 0.114),
            top2_10=MomentTarget(0.250, 0.130),
        )
        records = apply_sample_filter(synth_registry(config))
        stats = year_stats(records)
        assert stats.r_spi_1 == pytest.approx(0.644, abs=0.10)

    def test_mode_top11_with_zero_residual_matches_top10(self):
        recs = []
        rng = random.Random(5)
        for i in range(40):
            shares = sorted((rng.uniform(0.01, 0.3) for _ in range(5)), reverse=True)
            total = sum(shares)
            if total > 0.99:
                shares = [s / (total * 1.02) for s in shares]
            recs.append(record(f"f{i}", shares, meeting_share=min(1.0, sum(shares))))
        top10 = year_stats(recs, spi_mode="top10")
        top11 = year_stats(recs, spi_mode="top11")
        assert top11.r_spi_1 == top10.r_spi_1

    def test_variant_ordering_not_assumed_only_bounds(self):
        recs = [record(f"f{i}", (0.35, 0.2, 0.1), meeting_share=0.7) for i in range(3)]
        stats = year_stats(recs)
        for v in (stats.r_spi_1_top9, stats.r_spi_1_top10, stats.r_spi_1_top11):
            assert 0.0 <= v <= 1.0


class TestYearStatsFromDraws:
    def test_atom_count_and_tail(self):
        stats = year_stats_from_draws(1999, [1.0, 1.0, 0.4, 0.6])
        assert stats.r_spi_1 == 0.5
        assert stats.n_spi_lt1 == 2
        assert stats.spi_lt1_mean == pytest.approx(0.5)
        assert stats.m_top1 is None

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            year_stats_from_draws(1999, [])


class TestYearStatsValidation:
    def test_rejects_out_of_range_ratio(self):
        with pytest.raises(ValueError):
            YearStats(year=2000, n_sample=5, r_spi_1=1.5)

    def test_rejects_negative_sample(self):
        with pytest.raises(ValueError):
            YearStats(year=2000, n_sample=-1)


class TestRunPipeline:
    def test_row_order_invariance(self):
        records = apply_sample_filter(synth_registry(registry_config()))
        config = PipelineConfig(min_sample=40)
        report_a = run_pipeline(records, config)
        shuffled = records[:]
        random.Random(99).shuffle(shuffled)
        report_b = run_pipeline(shuffled, config)
        assert report_a.to_json() == report_b.to_json()

    def test_workers_do_not_change_output(self):
        source = registry_config()
        base = run_pipeline(source, PipelineConfig(min_sample=40, workers=1))
        parallel = run_pipeline(source, PipelineConfig(min_sample=40, workers=4))
        assert base.to_json() == parallel.to_json()

    def test_threshold_drops_years_from_fits_only(self):
        stats = {
            MAIN_PRIVATE: [
                YearStats(year=1995, n_sample=10, r_spi_1=0.5),
                *[
                    YearStats(year=1996 + i, n_sample=80, r_spi_1=0.58 + 0.05 * math.sin(i))
                    for i in range(8)
                ],
            ]
        }
        report = build_report(stats, PipelineConfig(min_sample=50))
        group = report.groups[MAIN_PRIVATE]
        assert len(group.years) == 9  # below-threshold year still reported
        assert group.fitted_years == tuple(range(1996, 2004))

    def test_no_group_survives_threshold(self):
        stats = {MAIN_PRIVATE: [YearStats(year=2000, n_sample=10, r_spi_1=0.5)]}
        with pytest.raises(DataError):
            build_report(stats, PipelineConfig(min_sample=50))

    def test_outcomes_mode_fits_full_power_ratio(self):
        source = SynthConfig(
            years=tuple(range(1996, 2022)),
            firms_per_year=400,
            seed=7,
            pdf=ControlPowerPdf(wave=ideal_wave(1.5)),
        )
        report = run_pipeline(source, PipelineConfig())
        group = report.groups[MAIN_PRIVATE]
        fit = group.fits["r_spi_1"]
        assert not fit.degenerate
        assert abs(fit.period - 18.0) / 18.0 < 0.10
        assert "m_top1" not in group.fits

    def test_filter_applies(self):
        recs = [record("f1", (0.55, 0.1)), *(record(f"g{i}", (0.3, 0.1)) for i in range(6))]
        report = run_pipeline(recs, PipelineConfig(min_sample=5))
        assert report.groups[MAIN_PRIVATE].years[0].n_sample == 6

    def test_all_filtered_is_error(self):
        with pytest.raises(DataError):
            run_pipeline([record("f1", (0.6, 0.1))], PipelineConfig(min_sample=1))

    def test_multiple_groups_reported_separately(self):
        main = synth_registry(registry_config(firms_per_year=50))
        gem = synth_registry(
            registry_config(firms_per_year=50, seed=5, group=GroupKey("sme_gem", "state"))
        )
        report = run_pipeline(main + gem, PipelineConfig(min_sample=30))
        assert set(report.groups) == {MAIN_PRIVATE, GroupKey("sme_gem", "state")}
        for group_report in report.groups.values():
            assert "r_spi_1" in group_report.fits

    def test_correlations_against_macro_series(self):
        years = list(range(1996, 2012))
        stats = {
            MAIN_PRIVATE: [
                YearStats(
                    year=y,
                    n_sample=100,
                    r_spi_1=0.55 + 0.05 * math.cos(2 * math.pi * (y - 1996) / 9.0),
                    m_top1=0.30 - 0.002 * (y - 1996),
                    m_top2_10=0.25 + 0.003 * (y - 1996),
                )
                for y in years
            ]
        }
        macro = {y: 100.0 + 3.0 * (y - 1996) for y in years}
        config = PipelineConfig(min_sample=50, macros={"index": macro})
        report = build_report(stats, config)
        corr = report.groups[MAIN_PRIVATE].correlations["index"]
        assert corr["m_top1"].r == pytest.approx(-1.0, abs=1e-9)
        assert corr["m_top2_10"].r == pytest.approx(1.0, abs=1e-9)
        assert corr["m_top1"].n == len(years)


class TestPredictionDiagnostics:
    def build(self, phase_offset=math.pi):
        years = range(1996, 2022)
        period = 18.0
        stats = []
        for y in years:
            t = float(y - 1996)
            m_top1 = 0.28 + 0.03 * math.cos(2 * math.pi * t / period + math.pi)
            m_210 = 0.30 + 0.02 * (math.cos(2 * math.pi * t / (period / 2) + phase_offset) - 1.0)
            r1 = 0.58 + 0.05 * math.cos(2 * math.pi * t / (period / 2))
            stats.append(
                YearStats(year=y, n_sample=500, r_spi_1=r1, m_top1=m_top1, m_top2_10=m_210)
            )
        return build_report({MAIN_PRIVATE: stats}, PipelineConfig())

    def test_period_ratio_and_phase(self):
        diag = self.build().groups[MAIN_PRIVATE].diagnostics
        assert diag.period_ratio == pytest.approx(0.5, rel=0.01)
        assert diag.phase_diff == pytest.approx(math.pi, abs=0.01)
        assert diag.period_ratio_ok and diag.phase_diff_ok
        assert diag.period_ratio_rtol == 0.05
        assert diag.phase_diff_tol == 0.1

    def test_phase_mismatch_flagged(self):
        diag = self.build(phase_offset=math.pi / 2).groups[MAIN_PRIVATE].diagnostics
        assert diag.phase_diff_ok is False


class TestReportEmission:
    @pytest.fixture()
    def report(self):
        return run_pipeline(registry_config(), PipelineConfig(min_sample=40))

    def test_json_round_trip(self, report, tmp_path):
        paths = emit_report(report, "json", str(tmp_path))
        assert [p.endswith("report.json") for p in paths] == [True]
        text = (tmp_path / "report.json").read_text()
        assert Report.from_json(text) == report

    def test_csv_tables(self, report, tmp_path):
        paths = emit_report(report, "csv-tables", str(tmp_path))
        names = {p.rsplit("/", 1)[-1] for p in paths}
        assert names == {
            "table_meeting.csv",
            "table_spi1_ratio.csv",
            "table_spi_lt1.csv",
            "table_shares.csv",
            "table_fits.csv",
            "table_correlations.csv",
        }
        header = (tmp_path / "table_spi1_ratio.csv").read_text().splitlines()[0]
        assert header == "group,year,ratio,n"
        rows = (tmp_path / "table_spi1_ratio.csv").read_text().splitlines()[1:]
        assert len(rows) == len(report.groups[MAIN_PRIVATE].years)

    def test_yearstats_reproducible_from_tables(self, report, tmp_path):
        # every YearStats field must be recoverable from the CSVs alone
        import csv as csv_mod

        emit_report(report, "csv-tables", str(tmp_path))

        def load(name):
            with open(tmp_path / name, newline="") as fh:
                return {int(row["year"]): row for row in csv_mod.DictReader(fh)}

        def cell(row, key, kind=float):
            return None if row[key] == "" else kind(row[key])

        spi1 = load("table_spi1_ratio.csv")
        meeting = load("table_meeting.csv")
        lt1 = load("table_spi_lt1.csv")
        shares = load("table_shares.csv")
        for ys in report.groups[MAIN_PRIVATE].years:
            assert cell(spi1[ys.year], "ratio") == ys.r_spi_1
            assert int(spi1[ys.year]["n"]) == ys.n_sample
            m = meeting[ys.year]
            assert cell(m, "s_meeting_over_s_top10_mean") == ys.meeting_ratio_mean
            assert cell(m, "s_meeting_over_s_top10_sd") == ys.meeting_ratio_sd
            assert cell(m, "band_count_ratio") == ys.band_count_ratio
            assert int(m["n_meeting"]) == ys.n_meeting
            assert cell(m, "r_spi_1_top9") == ys.r_spi_1_top9
            assert cell(m, "r_spi_1_top10") == ys.r_spi_1_top10
            assert cell(m, "r_spi_1_top11") == ys.r_spi_1_top11
            assert int(m["n_top11"]) == ys.n_top11
            l = lt1[ys.year]
            assert cell(l, "mean") == ys.spi_lt1_mean
            assert cell(l, "sd") == ys.spi_lt1_sd
            assert cell(l, "band_ratio") == ys.spi_lt1_band
            assert int(l["n"]) == ys.n_spi_lt1
            s = shares[ys.year]
            assert cell(s, "top1_mean") == ys.m_top1
            assert cell(s, "top1_sd") == ys.m_top1_sd
            assert cell(s, "top2_10_mean") == ys.m_top2_10
            assert cell(s, "top2_10_sd") == ys.m_top2_10_sd

    def test_plot_data_shape(self, report, tmp_path):
        paths = emit_report(report, "plot-data", str(tmp_path))
        assert paths
        for path in paths:
            lines = open(path).read().splitlines()
            assert lines[0] == "t,observed,fitted"
            assert len(lines) - 1 == len(report.groups[MAIN_PRIVATE].fitted_years)

    def test_plot_data_matches_fit_predictions(self, report, tmp_path):
        emit_report(report, "plot-data", str(tmp_path))
        fit = report.groups[MAIN_PRIVATE].fits["r_spi_1"]
        path = tmp_path / "plot_main_private_r_spi_1.csv"
        for line in path.read_text().splitlines()[1:]:
            t, _, fitted = (float(v) for v in line.split(","))
            assert fitted == pytest.approx(wave_eval(fit.params, t), abs=1e-12)

    def test_unknown_format_rejected(self, report, tmp_path):
        with pytest.raises(ValueError):
            emit_report(report, "yaml", str(tmp_path))


class TestDeterminism:
    def test_identical_runs_byte_identical(self):
        a = run_pipeline(registry_config(), PipelineConfig(min_sample=40))
        b = run_pipeline(registry_config(), PipelineConfig(min_sample=40))
        assert a.to_json().encode() == b.to_json().encode()
