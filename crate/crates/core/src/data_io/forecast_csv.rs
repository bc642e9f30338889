use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{
    check_header, csv_error, field, fmt_decimal, open, write_err, MortalitySurface, Sex,
    YearAgeGrid,
};
use crate::error::{Error, Result};

const HEADER: [&str; 6] = ["year", "age", "sex", "median", "p2_5", "p97_5"];

/// Median and 95 % band of a forecast, in q-space.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastBands {
    pub sex: Sex,
    pub median: YearAgeGrid,
    pub lower: YearAgeGrid,
    pub upper: YearAgeGrid,
}

impl ForecastBands {
    pub fn new(
        sex: Sex,
        median: YearAgeGrid,
        lower: YearAgeGrid,
        upper: YearAgeGrid,
    ) -> Result<Self> {
        if !median.same_shape(&lower) || !median.same_shape(&upper) {
            return Err(Error::ShapeMismatch(
                "forecast band grids differ in shape".into(),
            ));
        }
        for ((&lo, &mid), &hi) in lower
            .values()
            .iter()
            .zip(median.values())
            .zip(upper.values())
        {
            if !(lo > 0.0 && hi <= 1.0 && lo <= mid && mid <= hi) {
                return Err(Error::Range {
                    location: format!("forecast band ({lo}, {mid}, {hi})"),
                    value: mid,
                    expected: "0 < p2.5 <= median <= p97.5 <= 1",
                });
            }
        }
        Ok(Self {
            sex,
            median,
            lower,
            upper,
        })
    }

    pub fn first_year(&self) -> i32 {
        self.median.first_year()
    }

    pub fn last_year(&self) -> i32 {
        self.median.last_year()
    }

    pub fn median_surface(&self) -> MortalitySurface {
        MortalitySurface::new(self.sex, self.median.clone()).expect("validated at construction")
    }
}

/// Writes one or more sexes to a single forecast CSV.
pub fn write_forecast_csv(path: &Path, bands: &[&ForecastBands]) -> Result<()> {
    if bands.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let file = super::create(path)?;
    write_forecast(file, bands).map_err(write_err(path))
}

fn write_forecast<W: Write>(w: W, bands: &[&ForecastBands]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for b in bands {
        for year in b.median.years() {
            for age in 0..=b.median.max_age() {
                wtr.write_record([
                    year.to_string(),
                    age.to_string(),
                    b.sex.to_string(),
                    fmt_decimal(b.median.get(year, age)),
                    fmt_decimal(b.lower.get(year, age)),
                    fmt_decimal(b.upper.get(year, age)),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_forecast_csv(path: &Path) -> Result<BTreeMap<Sex, ForecastBands>> {
    read_forecast(open(path)?)
}

pub fn read_forecast<R: Read>(reader: R) -> Result<BTreeMap<Sex, ForecastBands>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, &HEADER)?;
    let mut cells: BTreeMap<Sex, BTreeMap<(i32, u32), [f64; 3]>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let year: i32 = field(&record, 0, "year")?;
        let age: u32 = field(&record, 1, "age")?;
        let sex: Sex = field(&record, 2, "sex")?;
        let vals = [
            field(&record, 3, "median")?,
            field(&record, 4, "p2_5")?,
            field(&record, 5, "p97_5")?,
        ];
        if cells
            .entry(sex)
            .or_default()
            .insert((year, age), vals)
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
        return Err(Error::EmptyEnsemble);
    }
    let mut out = BTreeMap::new();
    for (sex, map) in cells {
        let first = map.keys().map(|k| k.0).min().expect("non-empty");
        let last = map.keys().map(|k| k.0).max().expect("non-empty");
        let max_age = map.keys().map(|k| k.1).max().expect("non-empty");
        let mut cols = [Vec::new(), Vec::new(), Vec::new()];
        for year in first..=last {
            for age in 0..=max_age {
                let v = map.get(&(year, age)).ok_or(Error::MissingCell {
                    sex: sex.code(),
                    year,
                    age,
                })?;
                for (c, x) in cols.iter_mut().zip(v) {
                    c.push(*x);
                }
            }
        }
        let [m, lo, hi] = cols.map(|c| YearAgeGrid::new(first, max_age, c).expect("rectangular"));
        out.insert(sex, ForecastBands::new(sex, m, lo, hi)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read_then_write_is_stable() {
        let g = |v: f64| YearAgeGrid::filled(2017, 2019, 2, v);
        let mut median = g(0.02);
        median.set(2018, 1, 1.0 / 7.0);
        let mut upper = g(0.03);
        upper.set(2018, 1, 0.2);
        let b = ForecastBands::new(Sex::Male, median, g(0.01), upper).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_forecast_csv(&p1, &[&b]).unwrap();
        let back = load_forecast_csv(&p1).unwrap();
        write_forecast_csv(&p2, &[&back[&Sex::Male]]).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(back[&Sex::Male].median.get(2017, 0), 0.02);
    }

    #[test]
    fn empty_input_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            write_forecast_csv(&dir.path().join("x.csv"), &[]),
            Err(Error::EmptyEnsemble)
        ));
    }

    #[test]
    fn band_order_enforced_on_read() {
        let text = "year,age,sex,median,p2_5,p97_5\n2017,0,F,0.01,0.02,0.03\n";
        assert!(matches!(
            read_forecast(text.as_bytes()),
            Err(Error::Range { .. })
        ));
    }
}
