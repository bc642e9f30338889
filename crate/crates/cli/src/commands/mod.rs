pub mod forecast;
pub mod life_table;
pub mod report;
pub mod simulate;
pub mod train;
pub mod tune;

use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use mortsim_core::data_io::{
    load_forecast_csv, load_mortality_csv, ForecastBands, LoadOptions, MortalitySurface, Sex,
};
use mortsim_core::forecaster::TrainConfig;
use mortsim_core::life_metrics::CombinedSurface;
use mortsim_core::neural::BackwardMode;

use crate::config::Resolver;
use crate::error::{CliError, CliResult};
use crate::manifest::{Manifest, OutDir};
use crate::{ModelArgs, MortalityInput};

pub struct Ctx<'a> {
    pub res: Resolver<'a>,
    pub manifest: Manifest,
    pub out: &'a mut OutDir,
    pub seed: u64,
}

impl Ctx<'_> {
    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        if !path.is_file() {
            return Err(CliError::Input(format!(
                "{role} input {} does not exist",
                path.display()
            )));
        }
        self.manifest.add_input(role, path)
    }

    pub fn sexes(&mut self, args: &MortalityInput) -> CliResult<Vec<Sex>> {
        let mut sexes = self
            .res
            .list("data", "sexes", args.sexes.clone(), Sex::BOTH.to_vec())?;
        sexes.sort();
        sexes.dedup();
        Ok(sexes)
    }

    /// Loads the historical surfaces for the requested sexes.
    pub fn mortality(
        &mut self,
        args: &MortalityInput,
        sexes: &[Sex],
    ) -> CliResult<BTreeMap<Sex, MortalitySurface>> {
        let path = self
            .res
            .require_path("data", "mortality", args.mortality.clone())?;
        let floor = self.res.optional("data", "floor", args.floor)?;
        self.input("mortality", &path)?;
        let mut all = load_mortality_csv(&path, LoadOptions { floor })?;
        let mut out = BTreeMap::new();
        for &sex in sexes {
            let s = all.remove(&sex).ok_or_else(|| {
                CliError::Input(format!("{} has no rows for sex {sex}", path.display()))
            })?;
            info!(
                "{sex}: mortality {}..={}, ages 0..={}",
                s.first_year(),
                s.last_year(),
                s.max_age()
            );
            out.insert(sex, s);
        }
        Ok(out)
    }

    /// History spliced with an optional forecast median.
    pub fn combined(
        &mut self,
        history: &BTreeMap<Sex, MortalitySurface>,
        forecast: Option<&Path>,
    ) -> CliResult<BTreeMap<Sex, CombinedSurface>> {
        let bands = match forecast {
            Some(p) => Some(self.forecast_bands(p)?),
            None => None,
        };
        splice(history, bands.as_ref())
    }

    pub fn forecast_bands(&mut self, path: &Path) -> CliResult<BTreeMap<Sex, ForecastBands>> {
        if !path.is_file() {
            return Err(CliError::MissingArtifact(format!(
                "forecast {} not found; produce it with `mortsim forecast`",
                path.display()
            )));
        }
        self.manifest.add_input("forecast", path)?;
        Ok(load_forecast_csv(path)?)
    }

    pub fn train_config(&mut self, m: &ModelArgs) -> CliResult<TrainConfig> {
        let d = TrainConfig::default();
        let r = &mut self.res;
        let stop = r.flag("train", "stop_gradient", m.stop_gradient)?;
        let cfg = TrainConfig {
            input_size: r.value("train", "input_size", m.input_size, d.input_size)?,
            depth: r.value("train", "depth", m.depth, d.depth)?,
            hidden_width: r.value("train", "hidden_width", m.hidden_width, d.hidden_width)?,
            n_train: r.value("train", "n_train", m.n_train, d.n_train)?,
            batch_size: r.value("train", "batch_size", m.batch_size, d.batch_size)?,
            window: r.value("train", "window", m.window, d.window)?,
            initial_rate: r.value("train", "learning_rate", m.learning_rate, d.initial_rate)?,
            rate_decay: r.value("train", "rate_decay", m.rate_decay, d.rate_decay)?,
            steps: r.value("train", "steps", m.steps, d.steps)?,
            b_init: r.value("train", "b_init", m.b_init, d.b_init)?,
            sigma_init: r.value("train", "sigma_init", m.sigma_init, d.sigma_init)?,
            backward: if stop {
                BackwardMode::StopGradient
            } else {
                BackwardMode::ThroughTime
            },
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn splice(
    history: &BTreeMap<Sex, MortalitySurface>,
    bands: Option<&BTreeMap<Sex, ForecastBands>>,
) -> CliResult<BTreeMap<Sex, CombinedSurface>> {
    history
        .iter()
        .map(|(&sex, h)| {
            let median = match bands {
                Some(b) => Some(
                    b.get(&sex)
                        .ok_or_else(|| {
                            CliError::MissingArtifact(format!("forecast has no rows for sex {sex}"))
                        })?
                        .median_surface(),
                ),
                None => None,
            };
            Ok((sex, CombinedSurface::new(h, median.as_ref())?))
        })
        .collect()
}

/// Writes rows through a csv writer, mapping failures to the output path.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub use mortsim_core::data_io::fmt_decimal as num;

/// Default cohort selection: every `step` years from the first year whose
/// whole life lies inside the surface.
pub fn complete_cohorts(s: &CombinedSurface, step: i32) -> Vec<i32> {
    let last_birth = s.last_year() - s.max_age() as i32;
    (s.first_year()..=last_birth)
        .step_by(step as usize)
        .collect()
}

/// Error for a cohort whose life runs past the available years.
pub fn cohort_beyond_horizon(s: &CombinedSurface, cohort: i32) -> CliError {
    let needed = cohort + s.max_age() as i32;
    if cohort < s.first_year() {
        CliError::MissingArtifact(format!(
            "cohort {cohort} starts before the first mortality year {}",
            s.first_year()
        ))
    } else {
        CliError::MissingArtifact(format!(
            "cohort {cohort} needs mortality through {needed} but the surface ends in {}; rerun `mortsim forecast --horizon {needed}`",
            s.last_year()
        ))
    }
}
