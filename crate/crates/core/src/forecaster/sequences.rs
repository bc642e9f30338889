use crate::data_io::LogRateSurface;
use crate::error::{Error, Result};
use crate::neural::Sequence;

/// Training pairs with the age each one was cut from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub sequences: Vec<Sequence>,
    pub ages: Vec<u32>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn refs(&self) -> Vec<&Sequence> {
        self.sequences.iter().collect()
    }
}

/// Number of (window, target) pairs one age series of `years` values yields.
pub fn sequence_count(years: usize, n: usize, n_train: usize) -> usize {
    (years + 1).saturating_sub(n + n_train)
}

/// Cuts every series in `ages` into windows of `n` log-rates followed by
/// `n_train` targets, sliding one year at a time.
pub fn make_training_sequences(
    x: &LogRateSurface,
    n: usize,
    n_train: usize,
    ages: &[u32],
) -> Result<Dataset> {
    let years = x.n_years();
    if years < n + n_train {
        return Err(Error::SurfaceTooShort {
            years,
            needed: n + n_train,
        });
    }
    let mut out = Dataset::default();
    for &age in ages {
        if age > x.max_age() {
            return Err(Error::InvalidConfig(format!(
                "age {age} beyond surface max {}",
                x.max_age()
            )));
        }
        let series = x.age_series(age);
        for start in 0..sequence_count(years, n, n_train) {
            out.sequences.push(Sequence {
                window: series[start..start + n].to_vec(),
                target: series[start + n..start + n + n_train].to_vec(),
            });
            out.ages.push(age);
        }
    }
    Ok(out)
}
