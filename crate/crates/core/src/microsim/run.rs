use std::io::Write;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use super::agent::init_population;
use super::ratio::dependency_ratio;
use super::scenario::{BrexitAdjuster, MigrationScenario, ScenarioKind};
use super::spa::{SpaScheme, YearMonth};
use super::step::{step_year, Demography, StepOptions, YearTally};
use crate::data_io::{fmt_decimal, PopulationTable};
use crate::error::{Error, Result};
use crate::{parallel, rng, stats};

/// Last year the engine will simulate to.
pub const MAX_END_YEAR: i32 = 2061;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// First year reported; the run itself starts at the population base
    /// year.
    pub start_year: i32,
    pub end_year: i32,
    pub replicates: usize,
    pub scheme: SpaScheme,
    pub scenario: MigrationScenario,
    pub step: StepOptions,
}

impl SimConfig {
    pub fn validate(&self, base_year: i32) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if !(self.step.scale >= 1.0 && self.step.scale.is_finite()) {
            return bad(format!("scale {} must be >= 1", self.step.scale));
        }
        if self.end_year > MAX_END_YEAR {
            return bad(format!("end year {} beyond {MAX_END_YEAR}", self.end_year));
        }
        if self.start_year < base_year || self.start_year > self.end_year {
            return bad(format!(
                "reporting range {}..={} must start at or after the base year {base_year}",
                self.start_year, self.end_year
            ));
        }
        if !(0.0..=1.0).contains(&self.step.male_birth_share) {
            return bad("male birth share outside [0, 1]".into());
        }
        YearMonth::new(self.start_year, self.step.eval_month)?;
        self.scenario.validate()
    }
}

/// One replicate's yearly ratios (per requested scheme) and tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRun {
    pub scenario: ScenarioKind,
    pub replicate: usize,
    pub years: Vec<i32>,
    /// `ratios[scheme][year]`; `None` where the denominator was empty.
    pub ratios: Vec<Vec<Option<f64>>>,
    pub tallies: Vec<YearTally>,
}

/// Runs one replicate from the base year, evaluating every scheme on the
/// same realised population.
pub fn run_replicate(
    cfg: &SimConfig,
    schemes: &[SpaScheme],
    population: &PopulationTable,
    demo: &Demography,
    replicate: usize,
) -> Result<ReplicateRun> {
    let mut pop = init_population(population, cfg.step.scale, cfg.seed)?;
    let mut rng = rng::stream(cfg.seed, replicate as u64);
    let mut adjuster = BrexitAdjuster::new(cfg.scenario.clone())?;
    let years: Vec<i32> = (cfg.start_year..=cfg.end_year).collect();
    let mut ratios = vec![Vec::with_capacity(years.len()); schemes.len()];
    let mut tallies = Vec::new();
    let mut year = population.base_year();
    loop {
        if year >= cfg.start_year {
            let date = YearMonth::new(year, cfg.step.eval_month)?;
            for (s, &scheme) in schemes.iter().enumerate() {
                ratios[s].push(match dependency_ratio(&pop, scheme, date) {
                    Ok(r) => Some(r),
                    Err(Error::EmptyDenominator { .. }) => None,
                    Err(e) => return Err(e),
                });
            }
        }
        if year == cfg.end_year {
            break;
        }
        tallies.push(step_year(
            &mut pop,
            demo,
            &mut adjuster,
            year,
            &cfg.step,
            &mut rng,
        )?);
        year += 1;
    }
    Ok(ReplicateRun {
        scenario: cfg.scenario.kind,
        replicate,
        years,
        ratios,
        tallies,
    })
}

/// Dependency ratios of one scheme and scenario across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub scheme: SpaScheme,
    pub scenario: ScenarioKind,
    pub years: Vec<i32>,
    /// `per_replicate[year][replicate]`.
    pub per_replicate: Vec<Vec<Option<f64>>>,
    pub mean: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl RatioSeries {
    /// Mean and nearest-rank 2.5/97.5 band over the defined values of each
    /// year.
    pub fn from_replicates(
        scheme: SpaScheme,
        scenario: ScenarioKind,
        years: Vec<i32>,
        per_replicate: Vec<Vec<Option<f64>>>,
    ) -> Self {
        let mut mean = Vec::with_capacity(years.len());
        let mut lower = Vec::with_capacity(years.len());
        let mut upper = Vec::with_capacity(years.len());
        for row in &per_replicate {
            let defined: Vec<f64> = row.iter().flatten().copied().collect();
            if defined.is_empty() {
                mean.push(None);
                lower.push(None);
                upper.push(None);
            } else {
                let (lo, _, hi) = stats::band(&defined);
                mean.push(Some(defined.iter().sum::<f64>() / defined.len() as f64));
                lower.push(Some(lo));
                upper.push(Some(hi));
            }
        }
        Self {
            scheme,
            scenario,
            years,
            per_replicate,
            mean,
            lower,
            upper,
        }
    }

    pub fn replicates(&self) -> usize {
        self.per_replicate.first().map_or(0, Vec::len)
    }
}

/// Everything produced by a scheme × scenario matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRun {
    pub series: Vec<RatioSeries>,
    pub runs: Vec<ReplicateRun>,
}

/// Runs each scenario's replicates once and evaluates every scheme on them.
/// Replicate `r` uses RNG stream `r` of `base.seed` in every scenario.
pub fn run_matrix(
    base: &SimConfig,
    schemes: &[SpaScheme],
    scenarios: &[MigrationScenario],
    population: &PopulationTable,
    demo: &Demography,
) -> Result<MatrixRun> {
    if schemes.is_empty() || scenarios.is_empty() {
        return Err(Error::InvalidConfig(
            "empty scheme or scenario selection".into(),
        ));
    }
    base.validate(population.base_year())?;
    for y in population.base_year()..base.end_year {
        demo.check_year(y)?;
    }
    let reps = base.replicates;
    let runs = parallel::try_map_indexed(scenarios.len() * reps, |i| {
        let cfg = SimConfig {
            scenario: scenarios[i / reps].clone(),
            ..base.clone()
        };
        run_replicate(&cfg, schemes, population, demo, i % reps)
    })?;
    let mut series = Vec::with_capacity(schemes.len() * scenarios.len());
    for (sc, scenario) in scenarios.iter().enumerate() {
        let group = &runs[sc * reps..(sc + 1) * reps];
        let years = group[0].years.clone();
        for (s, &scheme) in schemes.iter().enumerate() {
            let per_replicate = (0..years.len())
                .map(|t| group.iter().map(|r| r.ratios[s][t]).collect())
                .collect();
            series.push(RatioSeries::from_replicates(
                scheme,
                scenario.kind,
                years.clone(),
                per_replicate,
            ));
        }
        info!(
            "{}: {reps} replicates over {} years",
            scenario.kind,
            years.len()
        );
    }
    Ok(MatrixRun { series, runs })
}

/// Single scheme and scenario as given in `cfg`.
pub fn run_scenario(
    cfg: &SimConfig,
    population: &PopulationTable,
    demo: &Demography,
) -> Result<RatioSeries> {
    let mut m = run_matrix(
        cfg,
        &[cfg.scheme],
        std::slice::from_ref(&cfg.scenario),
        population,
        demo,
    )?;
    Ok(m.series.remove(0))
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_decimal).unwrap_or_default()
}

fn create(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn finish<W: Write>(path: &Path, w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

/// Long format: `year,scheme,scenario,replicate,ratio` (empty when undefined).
pub fn write_ratio_csv(path: &Path, series: &[RatioSeries]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["year", "scheme", "scenario", "replicate", "ratio"])
        .map_err(csv_err(path))?;
    for s in series {
        for (t, year) in s.years.iter().enumerate() {
            for (r, v) in s.per_replicate[t].iter().enumerate() {
                w.write_record([
                    year.to_string(),
                    s.scheme.to_string(),
                    s.scenario.to_string(),
                    r.to_string(),
                    opt(*v),
                ])
                .map_err(csv_err(path))?;
            }
        }
    }
    finish(path, w)
}

/// `year,scheme,scenario,mean,p2_5,p97_5`.
pub fn write_summary_csv(path: &Path, series: &[RatioSeries]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["year", "scheme", "scenario", "mean", "p2_5", "p97_5"])
        .map_err(csv_err(path))?;
    for s in series {
        for (t, year) in s.years.iter().enumerate() {
            w.write_record([
                year.to_string(),
                s.scheme.to_string(),
                s.scenario.to_string(),
                opt(s.mean[t]),
                opt(s.lower[t]),
                opt(s.upper[t]),
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish(path, w)
}

/// Per-replicate yearly accounting.
pub fn write_tally_csv(path: &Path, runs: &[ReplicateRun]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record([
        "scenario",
        "replicate",
        "year",
        "residents_start",
        "deaths",
        "births",
        "inflows",
        "outflows",
        "forced_departures",
        "returns",
        "residents_end",
    ])
    .map_err(csv_err(path))?;
    for run in runs {
        for t in &run.tallies {
            let fields = [
                t.year as usize,
                t.residents_start,
                t.deaths,
                t.births,
                t.inflows,
                t.outflows,
                t.forced_departures,
                t.returns,
                t.residents_end,
            ];
            let mut rec = vec![run.scenario.to_string(), run.replicate.to_string()];
            rec.extend(fields.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err(path))?;
        }
    }
    finish(path, w)
}
