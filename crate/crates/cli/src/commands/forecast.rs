use log::info;
use mortsim_core::data_io::{to_log_rates, write_forecast_csv, LogRateSurface, Sex};
use mortsim_core::forecaster::{
    ensemble_forecast, extrapolate, mean_reversion_summary, sensitivity_matrix, ForecastEnsemble,
    ReversionWindows, SensitivityMatrix,
};
use mortsim_core::neural::{Checkpoint, DenseCell};
use serde_json::json;

use super::{num, write_csv, Ctx};
use crate::error::{CliError, CliResult};
use crate::ForecastArgs;

pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_HORIZON: i32 = 2061;
pub const FORECAST_NAME: &str = "forecast.csv";

pub fn sensitivity_name(sex: Sex, age: u32) -> String {
    format!("sensitivity_{sex}_{age}.csv")
}

pub fn run(ctx: &mut Ctx, args: ForecastArgs) -> CliResult<()> {
    let sexes = ctx.sexes(&args.data)?;
    let horizon = ctx
        .res
        .value("forecast", "horizon", args.horizon, DEFAULT_HORIZON)?;
    let ages = ctx
        .res
        .list("forecast", "sensitivity", args.sensitivity, vec![])?;
    let checkpoint_paths = ctx.res.paths("forecast", "checkpoints", args.checkpoints);
    let checkpoints = checkpoint_paths
        .iter()
        .map(|p| {
            ctx.input("checkpoint", p)?;
            Ok((p.clone(), Checkpoint::load(p)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let training = if checkpoints.is_empty() {
        let runs = ctx.res.value("forecast", "runs", args.runs, DEFAULT_RUNS)?;
        Some((ctx.train_config(&args.model)?, runs))
    } else {
        None
    };
    let history = ctx.mortality(&args.data, &sexes)?;

    let mut all_bands = Vec::new();
    for (&sex, surface) in &history {
        let x = to_log_rates(surface);
        for &age in &ages {
            if age > x.max_age() {
                return Err(CliError::Input(format!(
                    "sensitivity age {age} beyond max age {}",
                    x.max_age()
                )));
            }
        }
        let (ensemble, cells) = match &training {
            Some((cfg, runs)) => {
                let outcome = ensemble_forecast(cfg, &x, *runs, horizon, ctx.seed)?;
                let cells: Vec<DenseCell> = outcome.models.into_iter().map(|m| m.cell).collect();
                (outcome.ensemble, cells)
            }
            None => {
                let cells: Vec<DenseCell> = checkpoints
                    .iter()
                    .filter(|(_, c)| {
                        c.meta.get("sex").map(String::as_str) == Some(&sex.to_string())
                    })
                    .map(|(_, c)| c.cell.clone())
                    .collect();
                if cells.is_empty() {
                    return Err(CliError::Input(format!(
                        "none of the checkpoints ({}) is marked for sex {sex}",
                        checkpoint_paths
                            .iter()
                            .map(|p| p.display().to_string())
                            .collect::<Vec<_>>()
                            .join(", ")
                    )));
                }
                let runs = cells
                    .iter()
                    .map(|c| extrapolate(c, &x, horizon))
                    .collect::<mortsim_core::Result<Vec<_>>>()?;
                (ForecastEnsemble::from_runs(runs)?, cells)
            }
        };
        info!("{sex}: {} runs extrapolated to {horizon}", ensemble.len());
        all_bands.push(ensemble.bands()?);
        for &age in &ages {
            write_sensitivity(ctx, sex, age, &cells, &x, horizon)?;
        }
    }
    let refs: Vec<_> = all_bands.iter().collect();
    write_forecast_csv(&ctx.out.file(FORECAST_NAME), &refs)?;
    if training.is_some() {
        ctx.manifest.seeds.insert("run_seed_base".into(), ctx.seed);
    }
    Ok(())
}

/// Ensemble-mean sensitivity matrix plus its diagonal summary.
fn write_sensitivity(
    ctx: &mut Ctx,
    sex: Sex,
    age: u32,
    cells: &[DenseCell],
    x: &LogRateSurface,
    horizon: i32,
) -> CliResult<()> {
    let per_run = mortsim_core::parallel::try_map_indexed(cells.len(), |i| {
        sensitivity_matrix(&cells[i], x, age, horizon)
    })?;
    let s = SensitivityMatrix::mean(&per_run)?;
    let path = ctx.out.file(&sensitivity_name(sex, age));
    let mut rows = Vec::with_capacity(s.row_years.len() * s.col_years.len());
    for (r, &t) in s.row_years.iter().enumerate() {
        for (c, &tp) in s.col_years.iter().enumerate() {
            rows.push([t.to_string(), tp.to_string(), num(s.values.get(r, c))]);
        }
    }
    write_csv(&path, &["t", "t_prime", "value"], rows)?;

    let max_lag = cells[0].spec().input_size;
    let summary = mean_reversion_summary(&s, max_lag, ReversionWindows::default())?;
    let lags: Vec<_> = summary
        .lags
        .iter()
        .map(|l| json!({"lag": l.lag, "mean": l.mean, "variance": l.variance, "count": l.count}))
        .collect();
    let body = json!({
        "sex": sex.to_string(),
        "age": age,
        "runs": cells.len(),
        "near_window": ReversionWindows::default().near,
        "far_window": ReversionWindows::default().far,
        "near_sum": summary.near_sum,
        "far_sum": summary.far_sum,
        "contrast": summary.contrast,
        "reverts": summary.reverts,
        "lags": lags,
    });
    let text = serde_json::to_string_pretty(&body).expect("summary serializes") + "\n";
    ctx.out
        .write_text(&format!("reversion_{sex}_{age}.json"), &text)
}
