use serde::{Deserialize, Serialize};

use crate::data_io::LogRateSurface;
use crate::error::{Error, Result};
use crate::neural::{rollout, rollout_jacobian, DenseCell, Matrix};

/// Relative sensitivities `S(t, t') = (q_t / q_t') ∂x_t/∂x_t'` of forecast
/// years `t` to earlier years `t'` for a single age.
///
/// Rows are forecast years, columns run from the first year of the input
/// window to the year before the horizon. Entries with `t' >= t` are zero.
/// The rate ratio uses the raw model outputs, before clamping to `q <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    pub age: u32,
    pub row_years: Vec<i32>,
    pub col_years: Vec<i32>,
    pub values: Matrix,
}

impl SensitivityMatrix {
    pub fn get(&self, row_year: i32, col_year: i32) -> Option<f64> {
        let r = self.row_years.iter().position(|&y| y == row_year)?;
        let c = self.col_years.iter().position(|&y| y == col_year)?;
        Some(self.values.get(r, c))
    }

    /// Element-wise mean of matrices sharing age and year axes.
    pub fn mean(matrices: &[SensitivityMatrix]) -> Result<SensitivityMatrix> {
        let first = matrices.first().ok_or(Error::EmptyEnsemble)?;
        let mut out = first.clone();
        for m in &matrices[1..] {
            if m.age != first.age
                || m.row_years != first.row_years
                || m.col_years != first.col_years
            {
                return Err(Error::ShapeMismatch(
                    "sensitivity matrices differ in axes".into(),
                ));
            }
            for (o, v) in out.values.data_mut().iter_mut().zip(m.values.data()) {
                *o += v;
            }
        }
        let scale = 1.0 / matrices.len() as f64;
        for o in out.values.data_mut() {
            *o *= scale;
        }
        Ok(out)
    }
}

/// Sensitivity matrix of the rollout from the last `N` observed years of
/// `age` up to `horizon`.
pub fn sensitivity_matrix(
    cell: &DenseCell,
    x: &LogRateSurface,
    age: u32,
    horizon: i32,
) -> Result<SensitivityMatrix> {
    let last = x.last_year();
    if horizon <= last {
        return Err(Error::HorizonInPast {
            horizon,
            last_year: last,
        });
    }
    if age > x.max_age() {
        return Err(Error::InvalidConfig(format!(
            "age {age} beyond surface max {}",
            x.max_age()
        )));
    }
    let n = cell.spec().input_size;
    if x.n_years() < n {
        return Err(Error::SurfaceTooShort {
            years: x.n_years(),
            needed: n,
        });
    }
    let k = (horizon - last) as usize;
    let series = x.age_series(age);
    let xi = &series[series.len() - n..];
    let outputs = rollout(cell, xi, k)?;
    let jac = rollout_jacobian(cell, xi, k)?;
    let buf: Vec<f64> = xi.iter().chain(&outputs).copied().collect();
    let first_col = last - n as i32 + 1;
    let cols = n + k - 1;
    let mut values = Matrix::zeros(k, cols);
    for j in 0..k {
        for p in 0..cols.min(n + j) {
            let v = (buf[n + j] - buf[p]).exp() * jac.get(j, p);
            values.set(j, p, v);
        }
    }
    Ok(SensitivityMatrix {
        age,
        row_years: (last + 1..=horizon).collect(),
        col_years: (first_col..first_col + cols as i32).collect(),
        values,
    })
}

/// Lag windows compared by the mean-reversion flag (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReversionWindows {
    pub near: (usize, usize),
    pub far: (usize, usize),
}

impl Default for ReversionWindows {
    fn default() -> Self {
        Self {
            near: (1, 16),
            far: (17, 32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagStat {
    pub lag: usize,
    pub mean: f64,
    /// Population variance along the diagonal; zero when the matrix is
    /// translation invariant.
    pub variance: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversionSummary {
    pub lags: Vec<LagStat>,
    pub near_sum: f64,
    /// `None` when no far lag is available.
    pub far_sum: Option<f64>,
    /// Mean over far lags minus mean over near lags.
    pub contrast: Option<f64>,
    /// Near lags pull down and far lags push up.
    pub reverts: bool,
}

impl ReversionSummary {
    pub fn lag(&self, lag: usize) -> Option<&LagStat> {
        self.lags.iter().find(|s| s.lag == lag)
    }
}

/// Averages the matrix along diagonals of constant lag `t - t'` for lags
/// `1..=max_lag` and tests for the mean-reversion sign pattern.
pub fn mean_reversion_summary(
    s: &SensitivityMatrix,
    max_lag: usize,
    windows: ReversionWindows,
) -> Result<ReversionSummary> {
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); max_lag + 1];
    for (r, &ty) in s.row_years.iter().enumerate() {
        for (c, &tc) in s.col_years.iter().enumerate() {
            let lag = ty - tc;
            if lag >= 1 && lag as usize <= max_lag {
                buckets[lag as usize].push(s.values.get(r, c));
            }
        }
    }
    let lags: Vec<LagStat> = buckets
        .iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .map(|(lag, b)| {
            let mean = b.iter().sum::<f64>() / b.len() as f64;
            let variance = b.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / b.len() as f64;
            LagStat {
                lag,
                mean,
                variance,
                count: b.len(),
            }
        })
        .collect();
    if lags.len() < 2 {
        return Err(Error::DegenerateMatrix(format!(
            "{} usable diagonals for lags 1..={max_lag}",
            lags.len()
        )));
    }
    let window = |(lo, hi): (usize, usize)| {
        let v: Vec<f64> = lags
            .iter()
            .filter(|l| l.lag >= lo && l.lag <= hi)
            .map(|l| l.mean)
            .collect();
        (!v.is_empty()).then(|| (v.iter().sum::<f64>(), v.len()))
    };
    let near = window(windows.near);
    let far = window(windows.far);
    let near_sum = near.map_or(0.0, |(s, _)| s);
    let contrast = match (near, far) {
        (Some((ns, nc)), Some((fs, fc))) => Some(fs / fc as f64 - ns / nc as f64),
        _ => None,
    };
    Ok(ReversionSummary {
        near_sum,
        far_sum: far.map(|(s, _)| s),
        contrast,
        reverts: near.is_some() && near_sum < 0.0 && far.is_some_and(|(s, _)| s > 0.0),
        lags,
    })
}
