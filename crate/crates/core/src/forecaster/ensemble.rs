use log::info;

use super::config::TrainConfig;
use super::sequences::make_training_sequences;
use super::train::{train, TrainedModel};
use crate::data_io::{ForecastBands, LogRateSurface, MortalitySurface, Sex, YearAgeGrid};
use crate::error::{Error, Result};
use crate::neural::{rollout, DenseCell};
use crate::{parallel, stats};

/// Converts a predicted log-rate to a probability in `(0, 1]`.
pub(crate) fn rate_from_log(x: f64) -> f64 {
    x.exp().clamp(f64::MIN_POSITIVE, 1.0)
}

/// Rolls the cell forward from the last `N` observed years of every age up
/// to and including `horizon`.
pub fn extrapolate(cell: &DenseCell, x: &LogRateSurface, horizon: i32) -> Result<MortalitySurface> {
    let last = x.last_year();
    if horizon <= last {
        return Err(Error::HorizonInPast {
            horizon,
            last_year: last,
        });
    }
    let n = cell.spec().input_size;
    if x.n_years() < n {
        return Err(Error::SurfaceTooShort {
            years: x.n_years(),
            needed: n,
        });
    }
    let k = (horizon - last) as usize;
    let mut grid = YearAgeGrid::filled(last + 1, horizon, x.max_age(), 1.0);
    for age in 0..=x.max_age() {
        let series = x.age_series(age);
        let out = rollout(cell, &series[series.len() - n..], k)?;
        for (j, &o) in out.iter().enumerate() {
            if !o.is_finite() {
                return Err(Error::Divergence { step: j, loss: o });
            }
            grid.set(last + 1 + j as i32, age, rate_from_log(o));
        }
    }
    MortalitySurface::new(x.sex(), grid)
}

/// Forecast runs from independently seeded models, with per-cell bands.
#[derive(Debug, Clone)]
pub struct ForecastEnsemble {
    sex: Sex,
    runs: Vec<MortalitySurface>,
}

impl ForecastEnsemble {
    pub fn from_runs(runs: Vec<MortalitySurface>) -> Result<Self> {
        let first = runs.first().ok_or(Error::EmptyEnsemble)?;
        let sex = first.sex();
        for r in &runs[1..] {
            if r.sex() != sex || !r.grid().same_shape(first.grid()) {
                return Err(Error::ShapeMismatch(
                    "ensemble runs differ in sex or shape".into(),
                ));
            }
        }
        Ok(Self { sex, runs })
    }

    pub fn sex(&self) -> Sex {
        self.sex
    }

    pub fn runs(&self) -> &[MortalitySurface] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Nearest-rank 2.5th percentile, median and 97.5th percentile of each
    /// cell across runs.
    pub fn bands(&self) -> Result<ForecastBands> {
        let template = self.runs[0].grid();
        let mut lower = template.clone();
        let mut median = template.clone();
        let mut upper = template.clone();
        let mut cell = Vec::with_capacity(self.runs.len());
        for year in template.years() {
            for age in 0..=template.max_age() {
                cell.clear();
                cell.extend(self.runs.iter().map(|r| r.q(year, age)));
                let (lo, mid, hi) = stats::band(&cell);
                lower.set(year, age, lo);
                median.set(year, age, mid);
                upper.set(year, age, hi);
            }
        }
        ForecastBands::new(self.sex, median, lower, upper)
    }
}

/// Trained models together with the ensemble they produced.
#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub ensemble: ForecastEnsemble,
    pub models: Vec<TrainedModel>,
}

/// Trains `runs` models on every age of `x` (run `r` seeded `base_seed + r`)
/// and extrapolates each to `horizon`.
pub fn ensemble_forecast(
    cfg: &TrainConfig,
    x: &LogRateSurface,
    runs: usize,
    horizon: i32,
    base_seed: u64,
) -> Result<EnsembleOutcome> {
    if runs == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if horizon <= x.last_year() {
        return Err(Error::HorizonInPast {
            horizon,
            last_year: x.last_year(),
        });
    }
    let ages: Vec<u32> = (0..=x.max_age()).collect();
    let data = make_training_sequences(x, cfg.input_size, cfg.n_train, &ages)?;
    let results = parallel::try_map_indexed(runs, |r| {
        let model = train(cfg, &data, base_seed.wrapping_add(r as u64))?;
        let forecast = extrapolate(&model.cell, x, horizon)?;
        info!(
            "{} run {r}: final training loss {:.6e}",
            x.sex(),
            model.checkpoint_losses.last().unwrap_or(&f64::NAN)
        );
        Ok::<_, Error>((model, forecast))
    })?;
    let (models, forecasts): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(EnsembleOutcome {
        ensemble: ForecastEnsemble::from_runs(forecasts)?,
        models,
    })
}
