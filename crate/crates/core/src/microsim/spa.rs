//! State pension age timetables by scheme, sex and birth month.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data_io::Sex;
use crate::error::{Error, Result};

/// A calendar month. Ordering is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidConfig(format!(
                "month {month} outside 1..=12"
            )));
        }
        Ok(Self { year, month })
    }

    /// Panicking constructor for literals.
    pub const fn ym(year: i32, month: u32) -> Self {
        assert!(month >= 1 && month <= 12);
        Self { year, month }
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Months since January of year 0.
    pub fn index(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_index(i: i64) -> Self {
        Self {
            year: i.div_euclid(12) as i32,
            month: i.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn add_months(self, m: i64) -> Self {
        Self::from_index(self.index() + m)
    }

    /// Whole months from `earlier` to `self`.
    pub fn months_since(self, earlier: YearMonth) -> i64 {
        self.index() - earlier.index()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        YearMonth::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

/// A pension age in whole months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PensionAge(pub u32);

impl PensionAge {
    pub const fn years(y: u32) -> Self {
        Self(y * 12)
    }

    pub fn months(self) -> u32 {
        self.0
    }

    pub fn whole_years(self) -> u32 {
        self.0 / 12
    }

    pub fn extra_months(self) -> u32 {
        self.0 % 12
    }

    pub fn as_years_f64(self) -> f64 {
        self.0 as f64 / 12.0
    }
}

impl fmt::Display for PensionAge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}y {}m", self.whole_years(), self.extra_months())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpaScheme {
    PreReform,
    EqualSpa,
    Spa68,
    AcceleratedSpa68,
}

impl SpaScheme {
    pub const ALL: [SpaScheme; 4] = [
        SpaScheme::PreReform,
        SpaScheme::EqualSpa,
        SpaScheme::Spa68,
        SpaScheme::AcceleratedSpa68,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpaScheme::PreReform => "pre_reform",
            SpaScheme::EqualSpa => "equal_spa",
            SpaScheme::Spa68 => "spa_68",
            SpaScheme::AcceleratedSpa68 => "accelerated_spa_68",
        }
    }
}

impl fmt::Display for SpaScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpaScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpaScheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown SPA scheme {s:?}")))
    }
}

/// From birth month `start` on, the pension age is `base` plus `step`
/// months for every month born after `start`, until the next segment.
struct Segment {
    start: YearMonth,
    base: u32,
    step: u32,
}

const fn seg(year: i32, month: u32, years: u32, months: u32, step: u32) -> Segment {
    Segment {
        start: YearMonth::ym(year, month),
        base: years * 12 + months,
        step,
    }
}

const EPOCH: (i32, u32) = (1900, 1);

const MEN_65: &[Segment] = &[seg(EPOCH.0, EPOCH.1, 65, 0, 0)];
const WOMEN_60: &[Segment] = &[seg(EPOCH.0, EPOCH.1, 60, 0, 0)];

// Women's rise to 65, then the move to 65 for everyone completed for
// those born in November 1953 (pension date November 2018).
const EQUAL_WOMEN: &[Segment] = &[
    seg(EPOCH.0, EPOCH.1, 60, 0, 0),
    seg(1950, 4, 60, 1, 1),
    seg(1953, 4, 63, 3, 3),
    seg(1953, 12, 65, 0, 0),
];

// Original equalisation, then 66/67/68 phased over two-year windows
// starting 2024, 2034 and 2044.
const SPA68_WOMEN: &[Segment] = &[
    seg(EPOCH.0, EPOCH.1, 60, 0, 0),
    seg(1950, 4, 60, 1, 1),
    seg(1955, 4, 65, 0, 0),
    seg(1959, 4, 65, 1, 1),
    seg(1960, 4, 66, 0, 0),
    seg(1968, 4, 66, 1, 1),
    seg(1969, 4, 67, 0, 0),
    seg(1977, 4, 67, 1, 1),
    seg(1978, 4, 68, 0, 0),
];

const SPA68_MEN: &[Segment] = &[
    seg(EPOCH.0, EPOCH.1, 65, 0, 0),
    seg(1959, 4, 65, 1, 1),
    seg(1960, 4, 66, 0, 0),
    seg(1968, 4, 66, 1, 1),
    seg(1969, 4, 67, 0, 0),
    seg(1977, 4, 67, 1, 1),
    seg(1978, 4, 68, 0, 0),
];

// Three months in the first month, monthly rises to 66 by September 2020,
// 67 between 2026 and 2028, 68 between 2044 and 2046.
const ACCEL_WOMEN: &[Segment] = &[
    seg(EPOCH.0, EPOCH.1, 60, 0, 0),
    seg(1950, 4, 60, 1, 1),
    seg(1953, 4, 63, 3, 3),
    seg(1953, 12, 65, 3, 1),
    seg(1954, 10, 66, 0, 0),
    seg(1960, 4, 66, 1, 1),
    seg(1961, 4, 67, 0, 0),
    seg(1977, 4, 67, 1, 1),
    seg(1978, 4, 68, 0, 0),
];

const ACCEL_MEN: &[Segment] = &[
    seg(EPOCH.0, EPOCH.1, 65, 0, 0),
    seg(1953, 12, 65, 3, 1),
    seg(1954, 10, 66, 0, 0),
    seg(1960, 4, 66, 1, 1),
    seg(1961, 4, 67, 0, 0),
    seg(1977, 4, 67, 1, 1),
    seg(1978, 4, 68, 0, 0),
];

fn table(scheme: SpaScheme, sex: Sex) -> &'static [Segment] {
    match (scheme, sex) {
        (SpaScheme::PreReform, Sex::Male) => MEN_65,
        (SpaScheme::PreReform, Sex::Female) => WOMEN_60,
        (SpaScheme::EqualSpa, Sex::Male) => MEN_65,
        (SpaScheme::EqualSpa, Sex::Female) => EQUAL_WOMEN,
        (SpaScheme::Spa68, Sex::Male) => SPA68_MEN,
        (SpaScheme::Spa68, Sex::Female) => SPA68_WOMEN,
        (SpaScheme::AcceleratedSpa68, Sex::Male) => ACCEL_MEN,
        (SpaScheme::AcceleratedSpa68, Sex::Female) => ACCEL_WOMEN,
    }
}

/// Pension age for someone born in `birth`. Births before 1900 take the
/// earliest plateau.
pub fn spa_at(scheme: SpaScheme, sex: Sex, birth: YearMonth) -> PensionAge {
    let segments = table(scheme, sex);
    let s = segments
        .iter()
        .rev()
        .find(|s| s.start <= birth)
        .unwrap_or(&segments[0]);
    let elapsed = birth.months_since(s.start).max(0) as u32;
    PensionAge(s.base + s.step * elapsed)
}

/// First month in which someone born in `birth` has reached pension age.
pub fn pension_date(scheme: SpaScheme, sex: Sex, birth: YearMonth) -> YearMonth {
    birth.add_months(spa_at(scheme, sex, birth).months() as i64)
}
