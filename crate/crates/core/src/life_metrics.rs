//! Cohort survival, life expectancy, retirement expectancy under pension
//! schemes, rectangularisation and sex mortality ratios.
//!
//! Expectancies are curtate with a half-year completion and are truncated at
//! the surface's maximum age: survivors to that age are credited with the
//! half year only, a small downward bias for low-mortality surfaces.

use serde::{Deserialize, Serialize};

use crate::data_io::{MortalitySurface, Sex, YearAgeGrid};
use crate::error::{Error, Result};
use crate::microsim::{spa_at, PensionAge, SpaScheme, YearMonth};

/// First age counted as adult in share-of-life figures, matching the lower
/// bound of the dependency ratio's denominator.
pub const ADULT_AGE: u32 = 15;

/// History spliced with a forecast into one gap-free surface.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedSurface {
    surface: MortalitySurface,
}

impl CombinedSurface {
    pub fn new(history: &MortalitySurface, forecast: Option<&MortalitySurface>) -> Result<Self> {
        let surface = match forecast {
            Some(f) => history.splice(f)?,
            None => history.clone(),
        };
        Ok(Self { surface })
    }

    pub fn from_surface(surface: MortalitySurface) -> Self {
        Self { surface }
    }

    pub fn surface(&self) -> &MortalitySurface {
        &self.surface
    }

    pub fn sex(&self) -> Sex {
        self.surface.sex()
    }

    pub fn first_year(&self) -> i32 {
        self.surface.first_year()
    }

    pub fn last_year(&self) -> i32 {
        self.surface.last_year()
    }

    pub fn max_age(&self) -> u32 {
        self.surface.max_age()
    }

    pub fn q(&self, year: i32, age: u32) -> f64 {
        self.surface.q(year, age)
    }

    /// Errors unless years `from..=to` are all covered.
    pub fn require_years(&self, from: i32, to: i32) -> Result<()> {
        let (first, last) = (self.first_year(), self.last_year());
        let needed = if from < first {
            from
        } else if to > last {
            to
        } else {
            return Ok(());
        };
        Err(Error::InsufficientHorizon {
            needed,
            first_year: first,
            last_year: last,
        })
    }

    /// Mortality rate along the diagonal of the cohort born in `birth_year`.
    fn cohort_q(&self, birth_year: i32, age: u32) -> f64 {
        self.q(birth_year + age as i32, age)
    }
}

/// Probability of surviving to each exact age, `l[0] = 1`, with one entry
/// past the maximum age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSurvival {
    pub birth_year: i32,
    pub l: Vec<f64>,
}

pub fn survival_curve(s: &CombinedSurface, birth_year: i32) -> Result<CohortSurvival> {
    let m = s.max_age();
    s.require_years(birth_year, birth_year + m as i32)?;
    let mut l = Vec::with_capacity(m as usize + 2);
    l.push(1.0);
    for a in 0..=m {
        let prev = l[a as usize];
        l.push(prev * (1.0 - s.cohort_q(birth_year, a)));
    }
    Ok(CohortSurvival { birth_year, l })
}

/// Remaining life expectancy at exact age `age` for the cohort born in
/// `birth_year`.
pub fn life_expectancy_at(s: &CombinedSurface, birth_year: i32, age: u32) -> Result<f64> {
    let m = s.max_age();
    if age > m {
        return Err(Error::InvalidConfig(format!(
            "age {age} beyond surface max {m}"
        )));
    }
    if age < m {
        s.require_years(birth_year + age as i32, birth_year + m as i32 - 1)?;
    }
    let mut alive = 1.0;
    let mut total = 0.0;
    for a in age..m {
        alive *= 1.0 - s.cohort_q(birth_year, a);
        if alive == 0.0 {
            break;
        }
        total += alive;
    }
    Ok(total + 0.5)
}

/// [`life_expectancy_at`] at a fractional age, interpolated linearly
/// between the neighbouring whole ages.
pub fn life_expectancy_at_fractional(
    s: &CombinedSurface,
    birth_year: i32,
    age: f64,
) -> Result<f64> {
    if !(age >= 0.0) {
        return Err(Error::InvalidConfig(format!("negative age {age}")));
    }
    let lo = age.floor() as u32;
    let frac = age - lo as f64;
    let e_lo = life_expectancy_at(s, birth_year, lo)?;
    if frac == 0.0 || lo >= s.max_age() {
        return Ok(e_lo);
    }
    let e_hi = life_expectancy_at(s, birth_year, lo + 1)?;
    Ok(e_lo + frac * (e_hi - e_lo))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetirementExpectancy {
    pub retirement_year: i32,
    pub birth_year: i32,
    pub spa: PensionAge,
    pub expectancy: f64,
    /// Retirement years over adult years (from age 15).
    pub adult_share: f64,
    /// Retirement years over the whole expected lifespan.
    pub life_share: f64,
}

fn expectancy_record(
    s: &CombinedSurface,
    retirement_year: i32,
    birth_year: i32,
    spa: PensionAge,
) -> Result<RetirementExpectancy> {
    let expectancy = life_expectancy_at_fractional(s, birth_year, spa.as_years_f64())?;
    let spa_years = spa.as_years_f64();
    Ok(RetirementExpectancy {
        retirement_year,
        birth_year,
        spa,
        expectancy,
        adult_share: expectancy / (spa_years - ADULT_AGE as f64 + expectancy),
        life_share: expectancy / (spa_years + expectancy),
    })
}

/// Expectancy at a fixed pension age for the cohort reaching it in
/// `retirement_year`.
pub fn retirement_expectancy_at_age(
    s: &CombinedSurface,
    retirement_year: i32,
    spa: PensionAge,
) -> Result<RetirementExpectancy> {
    let birth_year = retirement_year - spa.whole_years() as i32;
    expectancy_record(s, retirement_year, birth_year, spa)
}

/// Expectancy at pension age for the cohort whose mid-year members reach
/// pension age closest to the middle of `retirement_year` under `scheme`.
pub fn retirement_life_expectancy(
    s: &CombinedSurface,
    retirement_year: i32,
    scheme: SpaScheme,
    sex: Sex,
) -> Result<RetirementExpectancy> {
    let target = retirement_year as f64 + 0.5;
    let candidates = (retirement_year - 90)..=(retirement_year - 40);
    let (birth_year, spa) = candidates
        .map(|b| (b, spa_at(scheme, sex, YearMonth::ym(b, 7))))
        .min_by(|(b1, s1), (b2, s2)| {
            let d1 = (*b1 as f64 + 0.5 + s1.as_years_f64() - target).abs();
            let d2 = (*b2 as f64 + 0.5 + s2.as_years_f64() - target).abs();
            d1.total_cmp(&d2)
        })
        .ok_or_else(|| {
            Error::SchemeUndefined(format!(
                "{scheme} has no cohort retiring in {retirement_year}"
            ))
        })?;
    if (birth_year as f64 + 0.5 + spa.as_years_f64() - target).abs() > 1.0 {
        return Err(Error::SchemeUndefined(format!(
            "{scheme}: no {sex} cohort reaches pension age within a year of {retirement_year}"
        )));
    }
    expectancy_record(s, retirement_year, birth_year, spa)
}

/// Cellwise `ln(q_m / q_f)`.
pub fn mortality_sex_ratio(
    male: &CombinedSurface,
    female: &CombinedSurface,
) -> Result<YearAgeGrid> {
    let (m, f) = (male.surface().grid(), female.surface().grid());
    if !m.same_shape(f) {
        return Err(Error::ShapeMismatch(format!(
            "male {}..={} x 0..={} vs female {}..={} x 0..={}",
            m.first_year(),
            m.last_year(),
            m.max_age(),
            f.first_year(),
            f.last_year(),
            f.max_age()
        )));
    }
    let values = m
        .values()
        .iter()
        .zip(f.values())
        .map(|(a, b)| (a / b).ln())
        .collect();
    Ok(YearAgeGrid::new(m.first_year(), m.max_age(), values).expect("same shape"))
}

/// Interquartile range of the age at death implied by a survival curve.
///
/// Deaths at age `a` have mass `l[a] - l[a+1]`; mass left in the final
/// entry is placed one year past the last age. The `p`-quantile is the
/// first age `a` with `l[a+1] < l[0](1 - p)`.
pub fn rectangularisation_index(c: &CohortSurvival) -> Result<f64> {
    let l = &c.l;
    if l.len() < 2 || !(l[0] > 0.0) {
        return Err(Error::DegenerateCurve(format!(
            "cohort {} has no mass to distribute",
            c.birth_year
        )));
    }
    let quantile = |p: f64| {
        let threshold = l[0] * (1.0 - p);
        (0..l.len() - 1)
            .find(|&a| l[a + 1] < threshold)
            .unwrap_or(l.len() - 1)
    };
    Ok(quantile(0.75) as f64 - quantile(0.25) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surface(
        sex: Sex,
        first: i32,
        last: i32,
        max_age: u32,
        f: impl Fn(i32, u32) -> f64,
    ) -> CombinedSurface {
        let mut g = YearAgeGrid::filled(first, last, max_age, 0.5);
        for y in first..=last {
            for a in 0..=max_age {
                g.set(y, a, f(y, a));
            }
        }
        CombinedSurface::from_surface(MortalitySurface::new(sex, g).unwrap())
    }

    fn constant(q: f64, max_age: u32) -> CombinedSurface {
        surface(Sex::Female, 1800, 2200, max_age, |_, _| q)
    }

    #[test]
    fn geometric_survival() {
        let c = survival_curve(&constant(0.5, 10), 1950).unwrap();
        for (a, l) in c.l.iter().enumerate() {
            assert_eq!(*l, 0.5f64.powi(a as i32));
        }
        assert_eq!(c.l.len(), 12);
    }

    #[test]
    fn absorbing_first_year() {
        let s = surface(Sex::Male, 1950, 2060, 5, |y, a| {
            if y == 1950 && a == 0 {
                1.0
            } else {
                0.1
            }
        });
        let c = survival_curve(&s, 1950).unwrap();
        assert_eq!(c.l[1], 0.0);
        assert!(c.l[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn expectancy_oracles() {
        // Σ_{k=1}^{99} 2^{-k} + 0.5
        let e = life_expectancy_at(&constant(0.5, 100), 1900, 1).unwrap();
        let oracle: f64 = (1..=99).map(|k| 0.5f64.powi(k)).sum::<f64>() + 0.5;
        assert!((e - oracle).abs() < 1e-15);
        assert!((e - 1.5).abs() < 1e-9);
        assert_eq!(
            life_expectancy_at(&constant(1.0, 100), 1900, 30).unwrap(),
            0.5
        );
        let near_zero = life_expectancy_at(&constant(1e-12, 100), 1900, 65).unwrap();
        assert!((near_zero - 35.5).abs() < 1e-8);
        assert_eq!(
            life_expectancy_at(&constant(0.3, 100), 1900, 100).unwrap(),
            0.5
        );
    }

    #[test]
    fn horizon_is_enforced() {
        let s = surface(Sex::Male, 1950, 2016, 100, |_, _| 0.01);
        let err = survival_curve(&s, 1960).unwrap_err();
        assert!(
            matches!(err, Error::InsufficientHorizon { needed: 2060, .. }),
            "{err:?}"
        );
        assert!(matches!(
            life_expectancy_at(&s, 1940, 5),
            Err(Error::InsufficientHorizon { needed: 1945, .. })
        ));
        // Ages 70..99 of the 1916 cohort lie inside 1986..2015.
        assert!(life_expectancy_at(&s, 1916, 70).is_ok());
    }

    #[test]
    fn fractional_age_interpolates() {
        let s = surface(Sex::Female, 1800, 2200, 100, |_, a| {
            0.001 * 1.1f64.powi(a as i32).min(900.0)
        });
        let e65 = life_expectancy_at(&s, 1950, 65).unwrap();
        let e66 = life_expectancy_at(&s, 1950, 66).unwrap();
        let mid = life_expectancy_at_fractional(&s, 1950, 65.25).unwrap();
        assert!((mid - (0.75 * e65 + 0.25 * e66)).abs() < 1e-12);
    }

    #[test]
    fn higher_spa_lowers_expectancy() {
        let s = surface(Sex::Female, 1800, 2200, 100, |_, a| {
            (0.0005 * 1.09f64.powi(a as i32)).min(1.0)
        });
        let e60 = retirement_expectancy_at_age(&s, 2000, PensionAge::years(60)).unwrap();
        let e65 = retirement_expectancy_at_age(&s, 2000, PensionAge::years(65)).unwrap();
        assert!(e65.expectancy < e60.expectancy);
        assert_eq!(e60.birth_year, 1940);
    }

    #[test]
    fn scheme_cohort_selection() {
        let s = constant(0.02, 100);
        let r = retirement_life_expectancy(&s, 2000, SpaScheme::PreReform, Sex::Female).unwrap();
        assert_eq!((r.birth_year, r.spa), (1940, PensionAge::years(60)));
        let r =
            retirement_life_expectancy(&s, 2048, SpaScheme::AcceleratedSpa68, Sex::Male).unwrap();
        assert_eq!((r.birth_year, r.spa), (1980, PensionAge::years(68)));
        let spa = r.spa.as_years_f64();
        assert!((r.adult_share - r.expectancy / (spa - 15.0 + r.expectancy)).abs() < 1e-15);
        assert!(r.life_share < r.adult_share);
    }

    #[test]
    fn sex_ratio() {
        let f = surface(Sex::Female, 2000, 2002, 3, |y, a| {
            0.01 + 0.001 * (y - 2000) as f64 + 0.002 * a as f64
        });
        let m = surface(Sex::Male, 2000, 2002, 3, |y, a| {
            2.0 * (0.01 + 0.001 * (y - 2000) as f64 + 0.002 * a as f64)
        });
        let r = mortality_sex_ratio(&m, &f).unwrap();
        assert!(r.values().iter().all(|v| (v - 2f64.ln()).abs() < 1e-15));
        assert!(mortality_sex_ratio(&f, &f)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        let short = surface(Sex::Male, 2000, 2001, 3, |_, _| 0.1);
        assert!(matches!(
            mortality_sex_ratio(&short, &f),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn rectangularisation_cases() {
        let geometric = survival_curve(&constant(0.5, 30), 1950).unwrap();
        assert_eq!(rectangularisation_index(&geometric).unwrap(), 2.0);
        let step = CohortSurvival {
            birth_year: 0,
            l: vec![1.0, 1.0, 1.0, 0.0, 0.0],
        };
        assert_eq!(rectangularisation_index(&step).unwrap(), 0.0);
        let uniform = CohortSurvival {
            birth_year: 0,
            l: vec![1.0, 0.75, 0.5, 0.25, 0.0, 0.0],
        };
        assert_eq!(rectangularisation_index(&uniform).unwrap(), 2.0);
        let empty = CohortSurvival {
            birth_year: 0,
            l: vec![0.0, 0.0],
        };
        assert!(matches!(
            rectangularisation_index(&empty),
            Err(Error::DegenerateCurve(_))
        ));
    }

    #[test]
    fn splice_requires_continuity() {
        let h = MortalitySurface::constant(Sex::Male, 1951, 2016, 3, 0.1).unwrap();
        let f = MortalitySurface::constant(Sex::Male, 2017, 2020, 3, 0.2).unwrap();
        let c = CombinedSurface::new(&h, Some(&f)).unwrap();
        assert_eq!(
            (c.first_year(), c.last_year(), c.q(2017, 0)),
            (1951, 2020, 0.2)
        );
        let gap = MortalitySurface::constant(Sex::Male, 2018, 2020, 3, 0.2).unwrap();
        assert!(CombinedSurface::new(&h, Some(&gap)).is_err());
    }

    fn random_surface() -> impl Strategy<Value = CombinedSurface> {
        prop::collection::vec(0.001f64..0.999, 13 * 13).prop_map(|v| {
            CombinedSurface::from_surface(
                MortalitySurface::new(Sex::Male, YearAgeGrid::new(2000, 12, v).unwrap()).unwrap(),
            )
        })
    }

    proptest! {
        #[test]
        fn survival_matches_product_oracle(s in random_surface()) {
            let c = survival_curve(&s, 2000).unwrap();
            for a in 0..c.l.len() {
                let oracle: f64 = (0..a).map(|j| 1.0 - s.q(2000 + j as i32, j as u32)).product();
                prop_assert!((c.l[a] - oracle).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&c.l[a]));
                if a > 0 {
                    prop_assert!(c.l[a] <= c.l[a - 1]);
                }
            }
        }

        #[test]
        fn raising_a_rate_lowers_expectancy(s in random_surface(), age in 0u32..12, bump in 0.01f64..0.5) {
            let birth = 2000;
            let before = life_expectancy_at(&s, birth, 0).unwrap();
            let mut g = s.surface().grid().clone();
            let cell = (birth + age as i32, age);
            let q = g.get(cell.0, cell.1);
            g.set(cell.0, cell.1, (q + bump).min(1.0));
            let bumped = CombinedSurface::from_surface(MortalitySurface::new(Sex::Male, g).unwrap());
            let after = life_expectancy_at(&bumped, birth, 0).unwrap();
            prop_assert!(after < before, "{after} !< {before}");
        }

        #[test]
        fn sex_ratio_antisymmetric(a in random_surface(), b in random_surface()) {
            let r1 = mortality_sex_ratio(&a, &b).unwrap();
            let r2 = mortality_sex_ratio(&b, &a).unwrap();
            for (x, y) in r1.values().iter().zip(r2.values()) {
                prop_assert!((x + y).abs() < 1e-12);
            }
        }

        #[test]
        fn spa_monotone_when_hazard_rises_with_age(base in 0.001f64..0.05, growth in 1.0f64..1.3, a in 40u32..90, d in 1u32..10) {
            // Year-invariant rates rising with age: residual expectancy
            // cannot grow with the starting age.
            let s = surface(Sex::Female, 1800, 2200, 100, |_, age| (base * growth.powi(age as i32)).min(1.0));
            let lo = retirement_expectancy_at_age(&s, 2020, PensionAge::years(a)).unwrap();
            let hi = retirement_expectancy_at_age(&s, 2020, PensionAge::years((a + d).min(100))).unwrap();
            prop_assert!(hi.expectancy <= lo.expectancy);
        }
    }
}
