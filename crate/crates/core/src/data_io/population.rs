use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_header, csv_error, field, fmt_decimal, open, write_err, Sex};
use crate::error::{Error, Result};

const HEADER: [&str; 5] = ["age", "sex", "origin", "arrival_year", "count"];

/// Origin class of a population cell.
///
/// `UkEmigrantAbroad` marks UK citizens living in the EU; they are tracked so
/// that repatriation can draw from them but are never counted as residents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Origin {
    Domestic,
    EuImmigrant,
    OtherImmigrant,
    UkEmigrantAbroad,
}

impl Origin {
    pub fn is_immigrant(self) -> bool {
        matches!(self, Origin::EuImmigrant | Origin::OtherImmigrant)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Domestic => "domestic",
            Origin::EuImmigrant => "eu_immigrant",
            Origin::OtherImmigrant => "other",
            Origin::UkEmigrantAbroad => "uk_emigrant_abroad",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "domestic" => Ok(Origin::Domestic),
            "eu_immigrant" => Ok(Origin::EuImmigrant),
            "other" | "other_immigrant" => Ok(Origin::OtherImmigrant),
            "uk_emigrant_abroad" => Ok(Origin::UkEmigrantAbroad),
            other => Err(format!("unknown origin {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRow {
    pub age: u32,
    pub sex: Sex,
    pub origin: Origin,
    /// Present exactly for immigrant origins.
    pub arrival_year: Option<i32>,
    pub count: f64,
}

/// Base-year population by age, sex, origin and (for immigrants) arrival year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTable {
    base_year: i32,
    rows: Vec<PopulationRow>,
}

impl PopulationTable {
    pub fn new(base_year: i32, rows: Vec<PopulationRow>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (i, r) in rows.iter().enumerate() {
            let loc = || format!("population row {}", i + 1);
            if !(r.count.is_finite() && r.count >= 0.0) {
                return Err(Error::Range {
                    location: loc(),
                    value: r.count,
                    expected: "finite count >= 0",
                });
            }
            match (r.origin.is_immigrant(), r.arrival_year) {
                (true, None) => {
                    return Err(Error::InvalidTable(format!(
                        "{}: immigrant cell needs arrival_year",
                        loc()
                    )))
                }
                (false, Some(_)) => {
                    return Err(Error::InvalidTable(format!(
                        "{}: arrival_year only allowed for immigrant cells",
                        loc()
                    )))
                }
                (true, Some(y)) if y > base_year || y < base_year - r.age as i32 - 1 => {
                    return Err(Error::InvalidTable(format!(
                        "{}: arrival_year {y} inconsistent with age {} in {base_year}",
                        loc(),
                        r.age
                    )))
                }
                _ => {}
            }
            if !seen.insert((r.age, r.sex, r.origin, r.arrival_year)) {
                return Err(Error::InvalidTable(format!("{}: duplicate cell", loc())));
            }
        }
        Ok(Self { base_year, rows })
    }

    pub fn base_year(&self) -> i32 {
        self.base_year
    }

    pub fn rows(&self) -> &[PopulationRow] {
        &self.rows
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().map(|r| r.count).sum()
    }

    pub fn max_age(&self) -> u32 {
        self.rows.iter().map(|r| r.age).max().unwrap_or(0)
    }
}

pub fn load_population_csv(path: &Path, base_year: i32) -> Result<PopulationTable> {
    read_population(open(path)?, base_year)
}

pub fn read_population<R: Read>(reader: R, base_year: i32) -> Result<PopulationTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, &HEADER)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let arrival = record.get(3).unwrap_or("").trim();
        let arrival_year = if arrival.is_empty() {
            None
        } else {
            Some(field(&record, 3, "arrival_year")?)
        };
        rows.push(PopulationRow {
            age: field(&record, 0, "age")?,
            sex: field(&record, 1, "sex")?,
            origin: field(&record, 2, "origin")?,
            arrival_year,
            count: field(&record, 4, "count")?,
        });
    }
    PopulationTable::new(base_year, rows)
}

pub fn write_population_csv(path: &Path, table: &PopulationTable) -> Result<()> {
    let file = super::create(path)?;
    write_population(file, table).map_err(write_err(path))
}

fn write_population<W: Write>(w: W, table: &PopulationTable) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for r in &table.rows {
        wtr.write_record([
            r.age.to_string(),
            r.sex.to_string(),
            r.origin.to_string(),
            r.arrival_year.map(|y| y.to_string()).unwrap_or_default(),
            fmt_decimal(r.count),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
