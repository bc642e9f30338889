use log::info;
use serde::{Deserialize, Serialize};

use super::config::{AgeSplit, TrainConfig};
use super::sequences::make_training_sequences;
use super::train::train_monitored;
use crate::data_io::LogRateSurface;
use crate::error::{Error, Result};
use crate::parallel;

/// Hyper-parameter grid searched by [`tune`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub input_sizes: Vec<usize>,
    pub depths: Vec<usize>,
    pub hidden_widths: Vec<usize>,
}

impl Default for TuneGrid {
    fn default() -> Self {
        Self {
            input_sizes: vec![15, 25, 40],
            depths: vec![3, 4, 5, 6, 7],
            hidden_widths: vec![32, 64, 128, 256, 512],
        }
    }
}

impl TuneGrid {
    /// Grid points in `(N, K, H)` lexicographic order.
    pub fn points(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for &n in &self.input_sizes {
            for &k in &self.depths {
                for &h in &self.hidden_widths {
                    out.push((n, k, h));
                }
            }
        }
        out
    }
}

/// Validation outcome of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneEntry {
    pub input_size: usize,
    pub depth: usize,
    pub hidden_width: usize,
    pub param_count: usize,
    pub seed: u64,
    /// Smallest validation loss over all checkpoints.
    pub min_validation_loss: f64,
    /// Step count at which that minimum was recorded.
    pub min_at_step: usize,
    pub validation_losses: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneReport {
    pub entries: Vec<TuneEntry>,
    pub best: usize,
    /// Base config with the winning geometry and `steps` set to the
    /// checkpoint of minimum validation loss.
    pub best_config: TrainConfig,
}

/// Index of the entry with the lowest minimum validation loss; ties go to the
/// smaller network. Entries with a non-finite loss never win unless nothing
/// else is available.
pub fn select_best(entries: &[TuneEntry]) -> Option<usize> {
    let key = |e: &TuneEntry| {
        let l = if e.min_validation_loss.is_finite() {
            e.min_validation_loss
        } else {
            f64::INFINITY
        };
        (l, e.param_count)
    };
    (0..entries.len()).min_by(|&a, &b| {
        let (la, pa) = key(&entries[a]);
        let (lb, pb) = key(&entries[b]);
        la.total_cmp(&lb).then(pa.cmp(&pb))
    })
}

/// Trains every grid point on the training ages, scoring the validation ages
/// at every checkpoint. Grid point `i` is seeded with `master_seed + i`.
pub fn tune(
    base: &TrainConfig,
    grid: &TuneGrid,
    x: &LogRateSurface,
    split: &AgeSplit,
    master_seed: u64,
) -> Result<TuneReport> {
    split.validate(x.max_age())?;
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::InvalidConfig("tuning grid is empty".into()));
    }
    let entries = parallel::try_map_indexed(points.len(), |i| {
        let (n, k, h) = points[i];
        let cfg = TrainConfig {
            input_size: n,
            depth: k,
            hidden_width: h,
            ..base.clone()
        };
        let seed = master_seed.wrapping_add(i as u64);
        let train_set = make_training_sequences(x, n, cfg.n_train, &split.training)?;
        let val_set = make_training_sequences(x, n, cfg.n_train, &split.validation)?;
        let model = train_monitored(&cfg, &train_set, Some(&val_set), seed)?;
        let (w, &min) = model
            .monitor_losses
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::Invariant("no validation checkpoints".into()))?;
        info!(
            "tune N={n} K={k} H={h}: min validation loss {min:.6e} at step {}",
            (w + 1) * cfg.window
        );
        Ok::<_, Error>(TuneEntry {
            input_size: n,
            depth: k,
            hidden_width: h,
            param_count: cfg.cell_spec()?.param_count(),
            seed,
            min_validation_loss: min,
            min_at_step: (w + 1) * cfg.window,
            validation_losses: model.monitor_losses,
        })
    })?;
    let best = select_best(&entries).ok_or_else(|| Error::Invariant("no tuning entries".into()))?;
    let e = &entries[best];
    let best_config = TrainConfig {
        input_size: e.input_size,
        depth: e.depth,
        hidden_width: e.hidden_width,
        steps: e.min_at_step,
        ..base.clone()
    };
    Ok(TuneReport {
        entries,
        best,
        best_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::{Sex, YearAgeGrid};

    fn entry(loss: f64, params: usize) -> TuneEntry {
        TuneEntry {
            input_size: 1,
            depth: 3,
            hidden_width: 1,
            param_count: params,
            seed: 0,
            min_validation_loss: loss,
            min_at_step: 10,
            validation_losses: vec![loss],
        }
    }

    #[test]
    fn selection_prefers_loss_then_size() {
        assert_eq!(
            select_best(&[entry(0.2, 10), entry(0.1, 500), entry(0.3, 1)]),
            Some(1)
        );
        assert_eq!(select_best(&[entry(0.1, 500), entry(0.1, 50)]), Some(1));
        assert_eq!(select_best(&[entry(f64::NAN, 1), entry(0.5, 9)]), Some(1));
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn default_grid_size() {
        assert_eq!(TuneGrid::default().points().len(), 3 * 5 * 5);
    }

    #[test]
    fn small_tune_run() {
        let max_age = 9;
        let mut values = Vec::new();
        for t in 0..20 {
            for a in 0..=max_age {
                values.push(-5.0 + 0.1 * a as f64 - 0.02 * t as f64);
            }
        }
        let x = LogRateSurface::new(Sex::Male, YearAgeGrid::new(1990, max_age, values).unwrap())
            .unwrap();
        let base = TrainConfig {
            n_train: 2,
            batch_size: 4,
            window: 20,
            steps: 100,
            initial_rate: 1e-3,
            ..TrainConfig::default()
        };
        let grid = TuneGrid {
            input_sizes: vec![3, 5],
            depths: vec![3],
            hidden_widths: vec![4, 8],
        };
        let r = tune(&base, &grid, &x, &AgeSplit::standard(max_age), 100).unwrap();
        assert_eq!(r.entries.len(), 4);
        assert_eq!(Some(r.best), select_best(&r.entries));
        for (i, e) in r.entries.iter().enumerate() {
            assert_eq!(e.seed, 100 + i as u64);
            assert_eq!(e.validation_losses.len(), 5);
            assert_eq!(
                e.min_validation_loss,
                e.validation_losses
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min)
            );
        }
        let best = &r.entries[r.best];
        assert_eq!(r.best_config.input_size, best.input_size);
        assert_eq!(r.best_config.steps, best.min_at_step);
        // Sequential and parallel paths agree exactly.
        let seq = crate::parallel::run_sequential(|| {
            tune(&base, &grid, &x, &AgeSplit::standard(max_age), 100)
        })
        .unwrap();
        assert_eq!(seq.entries, r.entries);
    }
}
