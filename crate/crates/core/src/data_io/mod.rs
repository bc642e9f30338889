//! Table loaders, validators and writers.
//!
//! All tables are CSV with a fixed header. Loaders reject malformed input
//! instead of repairing it; the only sanctioned adjustment is the explicit
//! `floor` option of the mortality loader.

mod flows;
mod forecast_csv;
mod grid;
mod mortality;
mod population;

pub use flows::{
    load_fertility_csv, load_flow_csv, read_fertility, read_flows, write_fertility_csv,
    write_flow_csv, Corridor, Direction, FertilityTable, FlowRow, FlowTable,
};
pub use forecast_csv::{load_forecast_csv, read_forecast, write_forecast_csv, ForecastBands};
pub use grid::YearAgeGrid;
pub use mortality::{
    load_mortality_csv, read_mortality, to_log_rates, write_mortality_csv, LoadOptions,
    LogRateSurface, MortalitySurface,
};
pub use population::{
    load_population_csv, read_population, write_population_csv, Origin, PopulationRow,
    PopulationTable,
};

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub const BOTH: [Sex; 2] = [Sex::Male, Sex::Female];

    pub fn code(self) -> char {
        match self {
            Sex::Male => 'M',
            Sex::Female => 'F',
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "M" | "m" => Ok(Sex::Male),
            "F" | "f" => Ok(Sex::Female),
            other => Err(format!("unknown sex {other:?}, expected M or F")),
        }
    }
}

/// Formats a value with at most 12 significant digits, using the shortest
/// decimal that reads back to the rounded value. Writing the parsed output
/// again yields the same text.
pub fn fmt_decimal(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn check_header<R: std::io::Read>(
    rdr: &mut csv::Reader<R>,
    expected: &[&str],
) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse("header", e))?
        .iter()
        .map(str::trim)
        .collect::<Vec<_>>();
    if headers != expected {
        return Err(Error::parse(
            "header",
            format!(
                "expected `{}`, found `{}`",
                expected.join(","),
                headers.join(",")
            ),
        ));
    }
    Ok(())
}

pub(crate) fn field<T: FromStr>(record: &csv::StringRecord, idx: usize, name: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    let line = record.position().map_or(0, |p| p.line());
    let raw = record
        .get(idx)
        .ok_or_else(|| Error::parse(format!("line {line}"), format!("missing column {name}")))?;
    raw.trim().parse().map_err(|e| {
        Error::parse(
            format!("line {line}, column {name}"),
            format!("{raw:?}: {e}"),
        )
    })
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    let location = e
        .position()
        .map_or_else(|| "csv".to_string(), |p| format!("line {}", p.line()));
    Error::parse(location, e)
}

pub(crate) fn write_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display().to_string(), format!("{other:?}")),
    }
}
