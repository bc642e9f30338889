use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_header, csv_error, fmt_decimal, open, write_err, Sex, YearAgeGrid};
use crate::error::{Error, Result};

const HEADER: [&str; 4] = ["year", "age", "sex", "qx"];

/// Annual death probabilities `q[year, age]` for one sex, read as period rates.
///
/// Every cell satisfies `0 < q <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MortalitySurface {
    sex: Sex,
    grid: YearAgeGrid,
}

impl MortalitySurface {
    pub fn new(sex: Sex, grid: YearAgeGrid) -> Result<Self> {
        for year in grid.years() {
            for age in 0..=grid.max_age() {
                let q = grid.get(year, age);
                if !(q > 0.0 && q <= 1.0) {
                    return Err(Error::Range {
                        location: format!("sex {sex}, year {year}, age {age}"),
                        value: q,
                        expected: "0 < q <= 1",
                    });
                }
            }
        }
        Ok(Self { sex, grid })
    }

    /// Uniform surface, mostly for tests and fixtures.
    pub fn constant(
        sex: Sex,
        first_year: i32,
        last_year: i32,
        max_age: u32,
        q: f64,
    ) -> Result<Self> {
        Self::new(sex, YearAgeGrid::filled(first_year, last_year, max_age, q))
    }

    pub fn sex(&self) -> Sex {
        self.sex
    }

    pub fn grid(&self) -> &YearAgeGrid {
        &self.grid
    }

    pub fn first_year(&self) -> i32 {
        self.grid.first_year()
    }

    pub fn last_year(&self) -> i32 {
        self.grid.last_year()
    }

    pub fn max_age(&self) -> u32 {
        self.grid.max_age()
    }

    pub fn n_years(&self) -> usize {
        self.grid.n_years()
    }

    pub fn q(&self, year: i32, age: u32) -> f64 {
        self.grid.get(year, age)
    }

    pub fn try_q(&self, year: i32, age: u32) -> Option<f64> {
        self.grid.try_get(year, age)
    }

    /// Joins a forecast that starts the year after this surface ends.
    pub fn splice(&self, forecast: &MortalitySurface) -> Result<MortalitySurface> {
        if forecast.sex != self.sex {
            return Err(Error::ShapeMismatch(format!(
                "cannot splice {} forecast onto {} history",
                forecast.sex, self.sex
            )));
        }
        let grid = self.grid.concat(&forecast.grid).ok_or_else(|| {
            Error::ShapeMismatch(format!(
                "forecast {}..={} (max age {}) does not continue history {}..={} (max age {})",
                forecast.first_year(),
                forecast.last_year(),
                forecast.max_age(),
                self.first_year(),
                self.last_year(),
                self.max_age()
            ))
        })?;
        Ok(Self {
            sex: self.sex,
            grid,
        })
    }
}

/// Natural log of a [`MortalitySurface`]; all cells `<= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRateSurface {
    sex: Sex,
    grid: YearAgeGrid,
}

impl LogRateSurface {
    /// Builds a log-rate surface directly; every cell must be finite and `<= 0`.
    pub fn new(sex: Sex, grid: YearAgeGrid) -> Result<Self> {
        if let Some(&bad) = grid
            .values()
            .iter()
            .find(|v| !(v.is_finite() && **v <= 0.0))
        {
            return Err(Error::Range {
                location: "log-rate surface".into(),
                value: bad,
                expected: "finite x <= 0",
            });
        }
        Ok(Self { sex, grid })
    }

    pub fn sex(&self) -> Sex {
        self.sex
    }

    pub fn grid(&self) -> &YearAgeGrid {
        &self.grid
    }

    pub fn first_year(&self) -> i32 {
        self.grid.first_year()
    }

    pub fn last_year(&self) -> i32 {
        self.grid.last_year()
    }

    pub fn max_age(&self) -> u32 {
        self.grid.max_age()
    }

    pub fn n_years(&self) -> usize {
        self.grid.n_years()
    }

    pub fn x(&self, year: i32, age: u32) -> f64 {
        self.grid.get(year, age)
    }

    pub fn age_series(&self, age: u32) -> Vec<f64> {
        self.grid.age_series(age)
    }

    pub fn to_rates(&self) -> MortalitySurface {
        MortalitySurface {
            sex: self.sex,
            grid: self.grid.map(f64::exp),
        }
    }
}

pub fn to_log_rates(s: &MortalitySurface) -> LogRateSurface {
    LogRateSurface {
        sex: s.sex,
        grid: s.grid.map(f64::ln),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoadOptions {
    /// When set, cells with `0 <= q < floor` are raised to `floor`.
    /// Negative values are still rejected.
    pub floor: Option<f64>,
}

/// Loads every sex present in a mortality CSV (`year,age,sex,qx`).
/// Rows may arrive in any order; each sex must form a complete grid with
/// ages starting at 0.
pub fn load_mortality_csv(
    path: &Path,
    opts: LoadOptions,
) -> Result<BTreeMap<Sex, MortalitySurface>> {
    read_mortality(open(path)?, opts)
}

pub fn read_mortality<R: Read>(
    reader: R,
    opts: LoadOptions,
) -> Result<BTreeMap<Sex, MortalitySurface>> {
    if let Some(floor) = opts.floor {
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "floor {floor} must lie in (0, 1]"
            )));
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, &HEADER)?;
    let mut cells: BTreeMap<Sex, BTreeMap<(i32, u32), f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let year: i32 = super::field(&record, 0, "year")?;
        let age: u32 = super::field(&record, 1, "age")?;
        let sex: Sex = super::field(&record, 2, "sex")?;
        let mut q: f64 = super::field(&record, 3, "qx")?;
        if let Some(floor) = opts.floor {
            if (0.0..floor).contains(&q) {
                q = floor;
            }
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Range {
                location: format!("sex {sex}, year {year}, age {age}"),
                value: q,
                expected: "0 < q <= 1",
            });
        }
        if cells
            .entry(sex)
            .or_default()
            .insert((year, age), q)
            .is_some()
        {
            return Err(Error::DuplicateCell {
                sex: sex.code(),
                year,
                age,
            });
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidTable("mortality table has no rows".into()));
    }
    cells
        .into_iter()
        .map(|(sex, map)| assemble(sex, map).map(|s| (sex, s)))
        .collect()
}

fn assemble(sex: Sex, map: BTreeMap<(i32, u32), f64>) -> Result<MortalitySurface> {
    let first_year = map.keys().map(|k| k.0).min().expect("non-empty");
    let last_year = map.keys().map(|k| k.0).max().expect("non-empty");
    let max_age = map.keys().map(|k| k.1).max().expect("non-empty");
    let mut values = Vec::with_capacity(map.len());
    for year in first_year..=last_year {
        for age in 0..=max_age {
            match map.get(&(year, age)) {
                Some(&q) => values.push(q),
                None => {
                    return Err(Error::MissingCell {
                        sex: sex.code(),
                        year,
                        age,
                    })
                }
            }
        }
    }
    let grid = YearAgeGrid::new(first_year, max_age, values).expect("rectangular");
    MortalitySurface::new(sex, grid)
}

/// Writes surfaces in the loader's format, years then ages ascending.
pub fn write_mortality_csv(path: &Path, surfaces: &[&MortalitySurface]) -> Result<()> {
    let file = super::create(path)?;
    write_mortality(file, surfaces).map_err(write_err(path))
}

fn write_mortality<W: Write>(w: W, surfaces: &[&MortalitySurface]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for s in surfaces {
        for year in s.grid.years() {
            for age in 0..=s.max_age() {
                wtr.write_record([
                    year.to_string(),
                    age.to_string(),
                    s.sex.to_string(),
                    fmt_decimal(s.q(year, age)),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn csv_text(first: i32, last: i32, max_age: u32, sex: &str, q: f64) -> String {
        let mut s = String::from("year,age,sex,qx\n");
        for y in first..=last {
            for a in 0..=max_age {
                s.push_str(&format!("{y},{a},{sex},{q}\n"));
            }
        }
        s
    }

    #[test]
    fn uniform_grid_loads() {
        let text = csv_text(1951, 2016, 100, "M", 0.01);
        let map = read_mortality(text.as_bytes(), LoadOptions::default()).unwrap();
        let s = &map[&Sex::Male];
        assert_eq!(s.n_years(), 66);
        assert_eq!(s.max_age(), 100);
        assert_eq!(s.grid().values().len(), 66 * 101);
        assert!(s.grid().values().iter().all(|&q| q == 0.01));
    }

    #[test]
    fn rows_in_any_order() {
        let text = "year,age,sex,qx\n2001,1,F,0.4\n2000,0,F,0.1\n2001,0,F,0.3\n2000,1,F,0.2\n";
        let s = &read_mortality(text.as_bytes(), LoadOptions::default()).unwrap()[&Sex::Female];
        assert_eq!(s.q(2000, 0), 0.1);
        assert_eq!(s.q(2000, 1), 0.2);
        assert_eq!(s.q(2001, 0), 0.3);
        assert_eq!(s.q(2001, 1), 0.4);
    }

    #[test]
    fn missing_cell_is_reported() {
        let text = csv_text(1990, 2005, 60, "M", 0.01).replace("1999,40,M,0.01\n", "");
        let err = read_mortality(text.as_bytes(), LoadOptions::default()).unwrap_err();
        assert!(
            matches!(
                err,
                Error::MissingCell {
                    year: 1999,
                    age: 40,
                    sex: 'M'
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn zero_rate_rejected_unless_floored() {
        let text = csv_text(2000, 2001, 3, "F", 0.02).replace("2001,2,F,0.02", "2001,2,F,0");
        let err = read_mortality(text.as_bytes(), LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Range { .. }));
        let floored = read_mortality(text.as_bytes(), LoadOptions { floor: Some(1e-6) }).unwrap();
        assert_eq!(floored[&Sex::Female].q(2001, 2), 1e-6);
    }

    #[test]
    fn negative_and_above_one_rejected() {
        for bad in ["-0.1", "1.5"] {
            let text = csv_text(2000, 2001, 3, "F", 0.02)
                .replace("2000,1,F,0.02", &format!("2000,1,F,{bad}"));
            let opts = LoadOptions { floor: Some(1e-6) };
            assert!(matches!(
                read_mortality(text.as_bytes(), opts),
                Err(Error::Range { .. })
            ));
        }
    }

    #[test]
    fn duplicate_and_parse_errors() {
        let mut text = csv_text(2000, 2000, 2, "M", 0.1);
        text.push_str("2000,1,M,0.1\n");
        assert!(matches!(
            read_mortality(text.as_bytes(), LoadOptions::default()),
            Err(Error::DuplicateCell {
                year: 2000,
                age: 1,
                ..
            })
        ));
        let text = "year,age,sex,qx\n2000,zero,M,0.1\n";
        assert!(matches!(
            read_mortality(text.as_bytes(), LoadOptions::default()),
            Err(Error::Parse { .. })
        ));
        let text = "year,age,qx\n2000,0,0.1\n";
        assert!(matches!(
            read_mortality(text.as_bytes(), LoadOptions::default()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn log_rates_of_known_values() {
        let grid = YearAgeGrid::new(2000, 1, vec![1.0, (-1.0f64).exp()]).unwrap();
        let x = to_log_rates(&MortalitySurface::new(Sex::Male, grid).unwrap());
        assert_eq!(x.x(2000, 0), 0.0);
        assert!((x.x(2000, 1) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn write_then_read_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let grid = YearAgeGrid::new(1990, 2, vec![0.1, 0.2, 0.3, 1.0 / 3.0, 0.05, 0.9]).unwrap();
        let s = MortalitySurface::new(Sex::Female, grid).unwrap();
        write_mortality_csv(&path, &[&s]).unwrap();
        let back = load_mortality_csv(&path, LoadOptions::default()).unwrap();
        let b = &back[&Sex::Female];
        for (a, c) in s.grid().values().iter().zip(b.grid().values()) {
            assert!(((a - c) / a).abs() < 1e-11);
        }
        let path2 = dir.path().join("m2.csv");
        write_mortality_csv(&path2, &[b]).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    proptest! {
        #[test]
        fn exp_of_log_rates_roundtrips(values in prop::collection::vec(1e-6f64..=1.0, 12)) {
            let grid = YearAgeGrid::new(2000, 3, values).unwrap();
            let s = MortalitySurface::new(Sex::Male, grid).unwrap();
            let x = to_log_rates(&s);
            prop_assert!(x.grid().values().iter().all(|&v| v <= 0.0));
            let back = x.to_rates();
            for (a, b) in s.grid().values().iter().zip(back.grid().values()) {
                prop_assert!(((a - b) / a).abs() <= 1e-12);
            }
        }
    }
}
