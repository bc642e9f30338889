use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_header, csv_error, field, fmt_decimal, open, write_err, Sex};
use crate::error::{Error, Result};

const FLOW_HEADER: [&str; 7] = [
    "year",
    "corridor",
    "sex",
    "age_lo",
    "age_hi",
    "direction",
    "count",
];
const FERTILITY_HEADER: [&str; 2] = ["age", "rate"];

/// Migration corridor, always seen from the UK side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Corridor {
    /// EU citizens moving between the EU and the UK.
    Eu,
    /// Non-EU foreign citizens.
    Other,
    /// UK citizens moving between the UK and the EU.
    UkCitizens,
}

impl Corridor {
    pub const ALL: [Corridor; 3] = [Corridor::Eu, Corridor::Other, Corridor::UkCitizens];

    pub fn as_str(self) -> &'static str {
        match self {
            Corridor::Eu => "eu",
            Corridor::Other => "other",
            Corridor::UkCitizens => "uk_citizens",
        }
    }
}

impl fmt::Display for Corridor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Corridor {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "eu" => Ok(Corridor::Eu),
            "other" => Ok(Corridor::Other),
            "uk_citizens" => Ok(Corridor::UkCitizens),
            other => Err(format!("unknown corridor {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "in" => Ok(Direction::In),
            "out" => Ok(Direction::Out),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub year: i32,
    pub corridor: Corridor,
    pub sex: Sex,
    pub age_lo: u32,
    pub age_hi: u32,
    pub direction: Direction,
    /// Persons per year.
    pub count: f64,
}

/// Annual migration counts by corridor, direction, sex and age band.
///
/// For every `(year, corridor, direction, sex)` present, the age bands
/// partition `0..=max_age`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTable {
    max_age: u32,
    by_year: BTreeMap<i32, Vec<FlowRow>>,
}

impl FlowTable {
    pub fn new(max_age: u32, rows: Vec<FlowRow>) -> Result<Self> {
        let mut by_year: BTreeMap<i32, Vec<FlowRow>> = BTreeMap::new();
        for r in rows {
            if !(r.count.is_finite() && r.count >= 0.0) {
                return Err(Error::Range {
                    location: format!("flow {} {} {} {}", r.year, r.corridor, r.direction, r.sex),
                    value: r.count,
                    expected: "finite count >= 0",
                });
            }
            if r.age_lo > r.age_hi {
                return Err(Error::InvalidTable(format!(
                    "flow band {}..{} is reversed",
                    r.age_lo, r.age_hi
                )));
            }
            by_year.entry(r.year).or_default().push(r);
        }
        for rows in by_year.values_mut() {
            rows.sort_by_key(|r| (r.corridor, r.direction, r.sex, r.age_lo));
            let mut groups: BTreeMap<_, Vec<&FlowRow>> = BTreeMap::new();
            for r in rows.iter() {
                groups
                    .entry((r.corridor, r.direction, r.sex))
                    .or_default()
                    .push(r);
            }
            for ((corridor, direction, sex), bands) in groups {
                let mut next = 0;
                for b in &bands {
                    if b.age_lo != next {
                        return Err(Error::InvalidTable(format!(
                            "year {} {corridor} {direction} {sex}: age bands must partition 0..={max_age}, gap or overlap at {}",
                            b.year, b.age_lo
                        )));
                    }
                    next = b.age_hi + 1;
                }
                if next != max_age + 1 {
                    return Err(Error::InvalidTable(format!(
                        "year {} {corridor} {direction} {sex}: age bands end at {} instead of {max_age}",
                        bands[0].year,
                        next - 1
                    )));
                }
            }
        }
        Ok(Self { max_age, by_year })
    }

    pub fn max_age(&self) -> u32 {
        self.max_age
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.by_year.keys().copied()
    }

    pub fn has_year(&self, year: i32) -> bool {
        self.by_year.contains_key(&year)
    }

    pub fn rows(&self) -> impl Iterator<Item = &FlowRow> {
        self.by_year.values().flatten()
    }

    /// Rows recorded for exactly `year`.
    pub fn year_rows(&self, year: i32) -> Option<&[FlowRow]> {
        self.by_year.get(&year).map(Vec::as_slice)
    }

    /// Rows used for `year`: the latest recorded year not after `year`, or
    /// the first recorded year when `year` precedes the table. Later years
    /// carry the last observed levels forward.
    pub fn levels_for(&self, year: i32) -> Option<(i32, &[FlowRow])> {
        self.by_year
            .range(..=year)
            .next_back()
            .or_else(|| self.by_year.iter().next())
            .map(|(&y, rows)| (y, rows.as_slice()))
    }

    /// Total persons in one corridor/direction for a recorded year.
    pub fn total(&self, year: i32, corridor: Corridor, direction: Direction) -> Option<f64> {
        self.year_rows(year).map(|rows| {
            rows.iter()
                .filter(|r| r.corridor == corridor && r.direction == direction)
                .map(|r| r.count)
                .sum()
        })
    }
}

pub fn load_flow_csv(path: &Path, max_age: u32) -> Result<FlowTable> {
    read_flows(open(path)?, max_age)
}

pub fn read_flows<R: Read>(reader: R, max_age: u32) -> Result<FlowTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, &FLOW_HEADER)?;
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let row = FlowRow {
            year: field(&record, 0, "year")?,
            corridor: field(&record, 1, "corridor")?,
            sex: field(&record, 2, "sex")?,
            age_lo: field(&record, 3, "age_lo")?,
            age_hi: field(&record, 4, "age_hi")?,
            direction: field(&record, 5, "direction")?,
            count: field(&record, 6, "count")?,
        };
        if !seen.insert((row.year, row.corridor, row.sex, row.age_lo, row.direction)) {
            return Err(Error::InvalidTable(format!(
                "duplicate flow row {} {} {} {} {}",
                row.year, row.corridor, row.sex, row.age_lo, row.direction
            )));
        }
        rows.push(row);
    }
    FlowTable::new(max_age, rows)
}

pub fn write_flow_csv(path: &Path, table: &FlowTable) -> Result<()> {
    let file = super::create(path)?;
    write_flows(file, table).map_err(write_err(path))
}

fn write_flows<W: Write>(w: W, table: &FlowTable) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(FLOW_HEADER)?;
    for r in table.rows() {
        wtr.write_record([
            r.year.to_string(),
            r.corridor.to_string(),
            r.sex.to_string(),
            r.age_lo.to_string(),
            r.age_hi.to_string(),
            r.direction.to_string(),
            fmt_decimal(r.count),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Age-specific annual birth probabilities for resident women.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FertilityTable {
    rates: BTreeMap<u32, f64>,
}

impl FertilityTable {
    pub fn new(rates: BTreeMap<u32, f64>) -> Result<Self> {
        for (&age, &rate) in &rates {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Range {
                    location: format!("fertility age {age}"),
                    value: rate,
                    expected: "0 <= rate <= 1",
                });
            }
        }
        Ok(Self { rates })
    }

    pub fn rate(&self, age: u32) -> f64 {
        self.rates.get(&age).copied().unwrap_or(0.0)
    }

    pub fn rates(&self) -> &BTreeMap<u32, f64> {
        &self.rates
    }
}

pub fn load_fertility_csv(path: &Path) -> Result<FertilityTable> {
    read_fertility(open(path)?)
}

pub fn read_fertility<R: Read>(reader: R) -> Result<FertilityTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, &FERTILITY_HEADER)?;
    let mut rates = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let age: u32 = field(&record, 0, "age")?;
        let rate: f64 = field(&record, 1, "rate")?;
        if rates.insert(age, rate).is_some() {
            return Err(Error::InvalidTable(format!(
                "duplicate fertility age {age}"
            )));
        }
    }
    FertilityTable::new(rates)
}

pub fn write_fertility_csv(path: &Path, table: &FertilityTable) -> Result<()> {
    let file = super::create(path)?;
    let run = || -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(file);
        wtr.write_record(FERTILITY_HEADER)?;
        for (age, rate) in &table.rates {
            wtr.write_record([age.to_string(), fmt_decimal(*rate)])?;
        }
        wtr.flush()?;
        Ok(())
    };
    run().map_err(write_err(path))
}
