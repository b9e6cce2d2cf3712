"""End-to-end statistics pipeline: per-year aggregates by experiment
group, Fourier and normal fits, oscillation-prediction diagnostics,
macro correlations, and machine-readable report emission.

The pipeline is a pure function of its inputs: records are canonically
sorted before any aggregation, every random element lives in the seeded
generators of the dataset module, and reports serialize with sorted keys,
so identical inputs give byte-identical outputs at any worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from . import __version__
from .dataset import (
    DataError,
    FirmYearRecord,
    GroupKey,
    SynthConfig,
    apply_sample_filter,
    group_records,
    records_to_csv_bytes,
    synth_outcomes,
    synth_registry,
)
from .fitting import (
    CorrelationResult,
    FourierFit,
    TimeSeries,
    fit_fourier1,
    fit_normal,
    fourier_extrema,
    pearson,
)
from .power_index import make_game, spi_single

SPI_MODES = ("top9", "top10", "top11")
SERIES_NAMES = ("r_spi_1", "m_top1", "m_top2_10")
MIN_FIT_YEARS = 4
PERIOD_RATIO_EXPECTED = 0.5
PERIOD_RATIO_RTOL = 0.05
PHASE_DIFF_EXPECTED = math.pi
PHASE_DIFF_TOL = 0.1

_FULL = Fraction(1)


@dataclass(frozen=True)
class YearStats:
    """Aggregates for one (group, year) cell."""

    year: int
    n_sample: int
    r_spi_1: float | None = None
    m_top1: float | None = None
    m_top1_sd: float | None = None
    m_top2_10: float | None = None
    m_top2_10_sd: float | None = None
    meeting_ratio_mean: float | None = None
    meeting_ratio_sd: float | None = None
    band_count_ratio: float | None = None
    n_meeting: int = 0
    r_spi_1_top9: float | None = None
    r_spi_1_top10: float | None = None
    r_spi_1_top11: float | None = None
    n_top11: int = 0
    spi_lt1_mean: float | None = None
    spi_lt1_sd: float | None = None
    spi_lt1_band: float | None = None
    n_spi_lt1: int = 0

    def __post_init__(self):
        if self.n_sample < 0:
            raise ValueError("sample size must be non-negative")
        for name in (
            "r_spi_1", "band_count_ratio",
            "r_spi_1_top9", "r_spi_1_top10", "r_spi_1_top11",
            "spi_lt1_mean", "spi_lt1_band",
        ):
            v = getattr(self, name)
            if v is not None and not -1e-12 <= v <= 1.0 + 1e-12:
                raise ValueError(f"{name}={v} outside [0, 1]")
        # meeting attendance may include holders outside the top 10, so the
        # attendance quotient is only bounded below
        if self.meeting_ratio_mean is not None and self.meeting_ratio_mean < 0:
            raise ValueError("meeting ratio cannot be negative")


def _mean_sd(values: Sequence[float]) -> tuple[float | None, float | None]:
    n = len(values)
    if n == 0:
        return None, None
    mean = math.fsum(values) / n
    if n == 1:
        return mean, None
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    return mean, sd


def _mode_game(record: FirmYearRecord, spi_mode: str):
    if spi_mode == "top9":
        return make_game(record.shares[:9])
    if spi_mode == "top10":
        return make_game(record.shares)
    if spi_mode == "top11":
        if record.meeting_share is None:
            raise DataError(
                f"firm {record.firm_id} year {record.year}: top11 mode needs meeting_share"
            )
        residual = max(record.meeting_share - record.top_total, 0.0)
        return make_game(record.shares + (residual,))
    raise ValueError(f"unknown spi mode {spi_mode!r}")


def _top1_spi(record: FirmYearRecord, spi_mode: str) -> Fraction:
    return spi_single(_mode_game(record, spi_mode), 0)


def year_stats(records: Sequence[FirmYearRecord], spi_mode: str = "top10") -> YearStats:
    """Aggregate one group-year: power ratios, share means, meeting ratios.

    All records must belong to the same (group, year). The leading
    holder's power is computed exactly per firm under the requested mode;
    firms below full power feed the normal-fit fields.
    """
    if not records:
        raise ValueError("no records for this group-year")
    keys = {(r.group, r.year) for r in records}
    if len(keys) != 1:
        raise ValueError("records span more than one (group, year) cell")
    if spi_mode not in SPI_MODES:
        raise ValueError(f"unknown spi mode {spi_mode!r}")
    year = records[0].year
    n = len(records)

    spi_top9 = [_top1_spi(r, "top9") for r in records]
    spi_top10 = [_top1_spi(r, "top10") for r in records]
    with_meeting = [r for r in records if r.meeting_share is not None]
    spi_top11 = [_top1_spi(r, "top11") for r in with_meeting]

    if spi_mode == "top9":
        spi_values = spi_top9
    elif spi_mode == "top10":
        spi_values = spi_top10
    else:
        if len(with_meeting) != n:
            missing = next(r for r in records if r.meeting_share is None)
            raise DataError(
                f"firm {missing.firm_id} year {missing.year}: top11 mode needs meeting_share"
            )
        spi_values = spi_top11

    r_spi_1 = sum(1 for v in spi_values if v == _FULL) / n
    lt1 = [float(v) for v in spi_values if v != _FULL]
    lt1_mean, lt1_sd = _mean_sd(lt1)
    lt1_band = None
    if len(lt1) >= 2:
        nf = fit_normal(lt1)
        lt1_mean, lt1_sd, lt1_band = nf.mu, nf.sigma, nf.band_ratio

    top9 = sum(1 for v in spi_top9 if v == _FULL) / n
    top10 = sum(1 for v in spi_top10 if v == _FULL) / n
    top11 = None
    if with_meeting:
        top11 = sum(1 for v in spi_top11 if v == _FULL) / len(with_meeting)

    m_top1, m_top1_sd = _mean_sd([r.top1 for r in records])
    m_top2_10, m_top2_10_sd = _mean_sd([r.top2_10 for r in records])

    ratios = [r.meeting_share / r.top_total for r in with_meeting if r.top_total > 0]
    ratio_mean, ratio_sd = _mean_sd(ratios)
    band = None
    if ratio_sd is not None:
        lo, hi = ratio_mean - ratio_sd, ratio_mean + ratio_sd
        band = sum(1 for v in ratios if lo <= v <= hi) / len(ratios)

    return YearStats(
        year=year,
        n_sample=n,
        r_spi_1=r_spi_1,
        m_top1=m_top1,
        m_top1_sd=m_top1_sd,
        m_top2_10=m_top2_10,
        m_top2_10_sd=m_top2_10_sd,
        meeting_ratio_mean=ratio_mean,
        meeting_ratio_sd=ratio_sd,
        band_count_ratio=band,
        n_meeting=len(ratios),
        r_spi_1_top9=top9,
        r_spi_1_top10=top10,
        r_spi_1_top11=top11,
        n_top11=len(with_meeting),
        spi_lt1_mean=lt1_mean,
        spi_lt1_sd=lt1_sd,
        spi_lt1_band=lt1_band,
        n_spi_lt1=len(lt1),
    )


def year_stats_from_draws(year: int, draws: Sequence[float]) -> YearStats:
    """Aggregate a year of raw power draws (no registry, no share data)."""
    values = [float(v) for v in draws]
    if not values:
        raise ValueError("no draws for this year")
    n = len(values)
    lt1 = [v for v in values if v != 1.0]
    lt1_mean, lt1_sd = _mean_sd(lt1)
    lt1_band = None
    if len(lt1) >= 2:
        nf = fit_normal(lt1)
        lt1_mean, lt1_sd, lt1_band = nf.mu, nf.sigma, nf.band_ratio
    return YearStats(
        year=year,
        n_sample=n,
        r_spi_1=sum(1 for v in values if v == 1.0) / n,
        spi_lt1_mean=lt1_mean,
        spi_lt1_sd=lt1_sd,
        spi_lt1_band=lt1_band,
        n_spi_lt1=len(lt1),
    )


@dataclass(frozen=True)
class PipelineConfig:
    spi_mode: str = "top10"
    min_sample: int = 50
    h: float = 1.5
    period_range: tuple[float, float] | None = None
    grid_step: float = 0.05
    workers: int = 1
    macros: Mapping[str, Mapping[int, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.spi_mode not in SPI_MODES:
            raise ValueError(f"unknown spi mode {self.spi_mode!r}")
        if self.min_sample < 1:
            raise ValueError("minimum sample size must be positive")
        if self.workers < 1:
            raise ValueError("worker count must be positive")
        if not self.h > 0:
            raise ValueError("h must be positive")


@dataclass(frozen=True)
class Diagnostics:
    """Oscillation-prediction checks with the tolerances they were held to."""

    period_ratio: float | None
    period_ratio_expected: float
    period_ratio_rtol: float
    period_ratio_ok: bool | None
    phase_diff: float | None
    phase_diff_expected: float
    phase_diff_tol: float
    phase_diff_ok: bool | None


@dataclass(frozen=True)
class GroupReport:
    group: GroupKey
    years: tuple[YearStats, ...]
    fitted_years: tuple[int, ...]
    fits: dict[str, FourierFit]
    extrema: dict[str, tuple[float, float]]
    diagnostics: Diagnostics
    correlations: dict[str, dict[str, CorrelationResult]]


@dataclass(frozen=True)
class Report:
    version: str
    provenance: dict
    groups: dict[GroupKey, GroupReport]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "provenance": dict(self.provenance),
            "groups": {
                f"{k.board}/{k.ownership}": _group_to_dict(g) for k, g in self.groups.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> "Report":
        groups = {}
        for key, payload in data["groups"].items():
            board, ownership = key.split("/")
            groups[GroupKey(board, ownership)] = _group_from_dict(GroupKey(board, ownership), payload)
        return cls(version=data["version"], provenance=dict(data["provenance"]), groups=groups)

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))


def _year_to_dict(ys: YearStats) -> dict:
    return {k: getattr(ys, k) for k in YearStats.__dataclass_fields__}


def _fit_to_dict(fit: FourierFit) -> dict:
    return {k: getattr(fit, k) for k in FourierFit.__dataclass_fields__}


def _group_to_dict(g: GroupReport) -> dict:
    return {
        "years": [_year_to_dict(ys) for ys in g.years],
        "fitted_years": list(g.fitted_years),
        "fits": {name: _fit_to_dict(fit) for name, fit in g.fits.items()},
        "extrema": {name: list(v) for name, v in g.extrema.items()},
        "diagnostics": {k: getattr(g.diagnostics, k) for k in Diagnostics.__dataclass_fields__},
        "correlations": {
            macro: {
                series: {"r": c.r, "p_value": c.p_value, "n": c.n}
                for series, c in by_series.items()
            }
            for macro, by_series in g.correlations.items()
        },
    }


def _group_from_dict(group: GroupKey, data: Mapping) -> GroupReport:
    return GroupReport(
        group=group,
        years=tuple(YearStats(**y) for y in data["years"]),
        fitted_years=tuple(data["fitted_years"]),
        fits={name: FourierFit(**f) for name, f in data["fits"].items()},
        extrema={name: tuple(v) for name, v in data["extrema"].items()},
        diagnostics=Diagnostics(**data["diagnostics"]),
        correlations={
            macro: {
                series: CorrelationResult(c["r"], c["p_value"], c["n"])
                for series, c in by_series.items()
            }
            for macro, by_series in data["correlations"].items()
        },
    )


def _series_value(ys: YearStats, name: str) -> float | None:
    return getattr(ys, name)


def _wrap_angle(angle: float) -> float:
    return angle % (2.0 * math.pi)


def build_group_report(
    group: GroupKey,
    stats: Sequence[YearStats],
    config: PipelineConfig,
) -> GroupReport:
    """Fit the yearly series of one group and derive the diagnostics.

    Only years with at least ``min_sample`` firms enter the fits; the time
    axis is measured from the first qualifying year so all series of the
    group share one origin (phases stay comparable).
    """
    stats = tuple(sorted(stats, key=lambda ys: ys.year))
    qualifying = [ys for ys in stats if ys.n_sample >= config.min_sample]
    fitted_years = tuple(ys.year for ys in qualifying)
    fits: dict[str, FourierFit] = {}
    extrema: dict[str, tuple[float, float]] = {}
    origin = fitted_years[0] if fitted_years else 0
    for name in SERIES_NAMES:
        points = [
            (float(ys.year - origin), _series_value(ys, name))
            for ys in qualifying
            if _series_value(ys, name) is not None
        ]
        if len(points) < MIN_FIT_YEARS:
            continue
        series = TimeSeries(tuple(p[0] for p in points), tuple(p[1] for p in points))
        fit = fit_fourier1(series, config.period_range, grid_step=config.grid_step)
        fits[name] = fit
        if not fit.degenerate:
            extrema[name] = fourier_extrema(fit)

    ratio = None
    ratio_ok = None
    f1, f210 = fits.get("m_top1"), fits.get("m_top2_10")
    if f1 and f210 and not f1.degenerate and not f210.degenerate:
        ratio = f210.period / f1.period
        ratio_ok = abs(ratio - PERIOD_RATIO_EXPECTED) <= PERIOD_RATIO_RTOL * PERIOD_RATIO_EXPECTED
    phase = None
    phase_ok = None
    fr = fits.get("r_spi_1")
    if f210 and fr and not f210.degenerate and not fr.degenerate:
        phase = _wrap_angle(f210.phase - fr.phase)
        gap = min(abs(phase - PHASE_DIFF_EXPECTED), 2.0 * math.pi - abs(phase - PHASE_DIFF_EXPECTED))
        phase_ok = gap <= PHASE_DIFF_TOL
    diagnostics = Diagnostics(
        period_ratio=ratio,
        period_ratio_expected=PERIOD_RATIO_EXPECTED,
        period_ratio_rtol=PERIOD_RATIO_RTOL,
        period_ratio_ok=ratio_ok,
        phase_diff=phase,
        phase_diff_expected=PHASE_DIFF_EXPECTED,
        phase_diff_tol=PHASE_DIFF_TOL,
        phase_diff_ok=phase_ok,
    )

    correlations: dict[str, dict[str, CorrelationResult]] = {}
    for macro_name in sorted(config.macros):
        macro = config.macros[macro_name]
        by_series: dict[str, CorrelationResult] = {}
        for name in SERIES_NAMES:
            pairs = [
                (_series_value(ys, name), macro[ys.year])
                for ys in qualifying
                if ys.year in macro and _series_value(ys, name) is not None
            ]
            if len(pairs) < 3:
                continue
            xs = [p[0] for p in pairs]
            ms = [p[1] for p in pairs]
            if max(xs) == min(xs) or max(ms) == min(ms):
                continue
            by_series[name] = pearson(xs, ms)
        if by_series:
            correlations[macro_name] = by_series

    return GroupReport(
        group=group,
        years=stats,
        fitted_years=fitted_years,
        fits=fits,
        extrema=extrema,
        diagnostics=diagnostics,
        correlations=correlations,
    )


def build_report(
    stats_by_group: Mapping[GroupKey, Sequence[YearStats]],
    config: PipelineConfig,
    provenance: Mapping | None = None,
) -> Report:
    """Assemble a report from per-group yearly aggregates."""
    if not any(
        any(ys.n_sample >= config.min_sample for ys in stats)
        for stats in stats_by_group.values()
    ):
        raise DataError(f"no group reaches the minimum sample size {config.min_sample} in any year")
    groups = {
        group: build_group_report(group, stats_by_group[group], config)
        for group in sorted(stats_by_group)
    }
    prov = {
        "input_digest": None,
        "seed": None,
        "spi_mode": config.spi_mode,
        "min_sample": config.min_sample,
        "h": config.h,
        "period_range": list(config.period_range) if config.period_range else None,
        "grid_step": config.grid_step,
    }
    if provenance:
        prov.update(provenance)
    return Report(version=__version__, provenance=prov, groups=groups)


def _sorted_records(records: Iterable[FirmYearRecord]) -> list[FirmYearRecord]:
    return sorted(records, key=lambda r: (r.year, r.board, r.ownership, r.firm_id, r.shares))


def _aggregate(records, config: PipelineConfig) -> dict[GroupKey, list[YearStats]]:
    grouped = group_records(records)
    cells = []
    for group in sorted(grouped):
        by_year: dict[int, list[FirmYearRecord]] = {}
        for rec in grouped[group]:
            by_year.setdefault(rec.year, []).append(rec)
        for year in sorted(by_year):
            cells.append((group, year, by_year[year]))
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda c: year_stats(c[2], config.spi_mode), cells))
    else:
        results = [year_stats(recs, config.spi_mode) for _, _, recs in cells]
    out: dict[GroupKey, list[YearStats]] = {}
    for (group, _, _), ys in zip(cells, results):
        out.setdefault(group, []).append(ys)
    return out


def run_pipeline(
    source: Sequence[FirmYearRecord] | SynthConfig,
    config: PipelineConfig | None = None,
) -> Report:
    """Run the full procedure on a record set or a synthetic config.

    Records are filtered to contested firms, grouped, aggregated per year,
    and fitted; outcome-mode configs skip straight from power draws to the
    yearly ratios. Output is invariant under input row order.
    """
    config = config or PipelineConfig()
    if isinstance(source, SynthConfig):
        digest_src = json.dumps(
            {
                "years": list(source.years),
                "firms_per_year": source.firms_per_year,
                "seed": source.seed,
                "group": list(source.group),
                "mode": source.mode,
            },
            sort_keys=True,
        ).encode()
        provenance = {
            "input_digest": hashlib.sha256(digest_src).hexdigest(),
            "seed": source.seed,
        }
        if source.mode == "outcomes":
            draws = synth_outcomes(source)
            stats = [year_stats_from_draws(year, draws[year]) for year in sorted(draws)]
            return build_report({source.group: stats}, config, provenance)
        records = synth_registry(source)
    else:
        records = _sorted_records(source)
        provenance = {
            "input_digest": hashlib.sha256(records_to_csv_bytes(records)).hexdigest(),
            "seed": None,
        }
    records = apply_sample_filter(_sorted_records(records))
    if not records:
        raise DataError("no records survive the sampling filter")
    return build_report(_aggregate(records, config), config, provenance)


# report emission ------------------------------------------------------------

REPORT_FORMATS = ("json", "csv-tables", "plot-data")


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = _csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _group_label(group: GroupKey) -> str:
    return f"{group.board}/{group.ownership}"


def _group_slug(group: GroupKey) -> str:
    return f"{group.board}_{group.ownership}"


def emit_report(report: Report, format: str, dest: str) -> list[str]:
    """Write the report to ``dest`` (a directory) in the requested format.

    json: the full nested report. csv-tables: one CSV per familiar table
    layout (meeting ratios, full-power ratios, below-full power stats,
    share moments, fits, correlations). plot-data: per fitted series the
    (t, observed, fitted) triples.
    """
    if format not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {format!r}")
    os.makedirs(dest, exist_ok=True)
    written: list[str] = []

    if format == "json":
        path = os.path.join(dest, "report.json")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(report.to_json())
        return [path]

    if format == "csv-tables":
        path = os.path.join(dest, "table_meeting.csv")
        _write_csv(
            path,
            ["group", "year", "s_meeting_over_s_top10_mean", "s_meeting_over_s_top10_sd",
             "band_count_ratio", "n_meeting", "r_spi_1_top9", "r_spi_1_top10",
             "r_spi_1_top11", "n_top11", "n_sample"],
            [
                [_group_label(g.group), ys.year, ys.meeting_ratio_mean, ys.meeting_ratio_sd,
                 ys.band_count_ratio, ys.n_meeting, ys.r_spi_1_top9, ys.r_spi_1_top10,
                 ys.r_spi_1_top11, ys.n_top11, ys.n_sample]
                for g in report.groups.values()
                for ys in g.years
            ],
        )
        written.append(path)

        path = os.path.join(dest, "table_spi1_ratio.csv")
        _write_csv(
            path,
            ["group", "year", "ratio", "n"],
            [
                [_group_label(g.group), ys.year, ys.r_spi_1, ys.n_sample]
                for g in report.groups.values()
                for ys in g.years
            ],
        )
        written.append(path)

        path = os.path.join(dest, "table_spi_lt1.csv")
        _write_csv(
            path,
            ["group", "year", "mean", "sd", "band_ratio", "n"],
            [
                [_group_label(g.group), ys.year, ys.spi_lt1_mean, ys.spi_lt1_sd,
                 ys.spi_lt1_band, ys.n_spi_lt1]
                for g in report.groups.values()
                for ys in g.years
            ],
        )
        written.append(path)

        path = os.path.join(dest, "table_shares.csv")
        _write_csv(
            path,
            ["group", "year", "top1_mean", "top1_sd", "top2_10_mean", "top2_10_sd", "n"],
            [
                [_group_label(g.group), ys.year, ys.m_top1, ys.m_top1_sd,
                 ys.m_top2_10, ys.m_top2_10_sd, ys.n_sample]
                for g in report.groups.values()
                for ys in g.years
            ],
        )
        written.append(path)

        path = os.path.join(dest, "table_fits.csv")
        _write_csv(
            path,
            ["group", "series", "a0", "a1", "b1", "period", "sse", "rmse", "r_squared",
             "degenerate", "max", "min", "period_ratio", "phase_diff"],
            [
                [_group_label(g.group), name, fit.a0, fit.a1, fit.b1, fit.period, fit.sse,
                 fit.rmse, fit.r_squared, fit.degenerate,
                 g.extrema.get(name, (None, None))[0], g.extrema.get(name, (None, None))[1],
                 g.diagnostics.period_ratio, g.diagnostics.phase_diff]
                for g in report.groups.values()
                for name, fit in g.fits.items()
            ],
        )
        written.append(path)

        path = os.path.join(dest, "table_correlations.csv")
        _write_csv(
            path,
            ["group", "macro", "series", "r", "p_value", "n"],
            [
                [_group_label(g.group), macro, series, c.r, c.p_value, c.n]
                for g in report.groups.values()
                for macro, by_series in g.correlations.items()
                for series, c in by_series.items()
            ],
        )
        written.append(path)
        return written

    # plot-data
    from .evolution import wave_eval

    for g in report.groups.values():
        origin = g.fitted_years[0] if g.fitted_years else 0
        by_year = {ys.year: ys for ys in g.years}
        for name, fit in g.fits.items():
            rows = []
            for year in g.fitted_years:
                observed = _series_value(by_year[year], name)
                if observed is None:
                    continue
                t = float(year - origin)
                fitted = fit.a0 if fit.degenerate else wave_eval(fit.params, t)
                rows.append([t, observed, fitted])
            path = os.path.join(dest, f"plot_{_group_slug(g.group)}_{name}.csv")
            _write_csv(path, ["t", "observed", "fitted"], rows)
            written.append(path)
    return written
