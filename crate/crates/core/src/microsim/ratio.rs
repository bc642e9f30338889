use super::agent::Population;
use super::spa::{spa_at, SpaScheme, YearMonth};
use crate::error::{Error, Result};

/// Residents at or above pension age over residents aged 15 up to pension
/// age, with ages in completed months at `date`.
pub fn dependency_ratio(pop: &Population, scheme: SpaScheme, date: YearMonth) -> Result<f64> {
    let (num, den) = dependency_counts(pop, scheme, date);
    if den == 0 {
        return Err(Error::EmptyDenominator {
            date: date.to_string(),
        });
    }
    Ok(num as f64 / den as f64)
}

/// `(at or above pension age, aged 15 to below pension age)`.
pub fn dependency_counts(pop: &Population, scheme: SpaScheme, date: YearMonth) -> (usize, usize) {
    let mut num = 0;
    let mut den = 0;
    for a in pop.residents() {
        let age = a.age_months(date);
        let spa = spa_at(scheme, a.sex, a.birth).months() as i64;
        if age >= spa {
            num += 1;
        } else if age >= 15 * 12 {
            den += 1;
        }
    }
    (num, den)
}
