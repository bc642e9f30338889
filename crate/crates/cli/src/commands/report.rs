use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mortsim_core::data_io::Sex;
use mortsim_core::life_metrics::{
    retirement_expectancy_at_age, CombinedSurface, RetirementExpectancy,
};
use mortsim_core::microsim::PensionAge;

use super::forecast::FORECAST_NAME;
use super::life_table::{sex_ratio_rows, survival_curves, survival_rows};
use super::simulate::SUMMARY_NAME;
use super::{num, splice, write_csv, Ctx};
use crate::error::{CliError, CliResult};
use crate::manifest::MANIFEST_NAME;
use crate::ReportArgs;

/// Every file a report directory contains, in a fixed order.
pub const BUNDLE: [&str; 8] = [
    "fig1_forecast_fan.csv",
    "fig2_survival_curves.csv",
    "fig3_sex_ratio.csv",
    "fig4_sensitivity.csv",
    "fig5_dependency_ratio.csv",
    "table1_retirement_expectancy.csv",
    "table1.txt",
    MANIFEST_NAME,
];

pub const DEFAULT_TABLE_YEARS: [i32; 3] = [1991, 2005, 2018];

/// Table columns: label, then retirement ages for women and men.
pub const TABLE_COLUMNS: [(&str, u32, u32); 3] = [
    ("60 for women / 65 for men", 60, 65),
    ("equal age 65", 65, 65),
    ("age 68", 68, 68),
];

const SUMMARY_HEADER: [&str; 6] = ["year", "scheme", "scenario", "mean", "p2_5", "p97_5"];

pub fn run(ctx: &mut Ctx, args: ReportArgs) -> CliResult<()> {
    let forecast_dir = ctx
        .res
        .path("report", "forecast_dir", args.forecast_dir)
        .ok_or_else(|| {
            CliError::MissingArtifact(
                "no forecast directory; pass --forecast-dir with the output of `mortsim forecast`"
                    .into(),
            )
        })?;
    let simulate_dir = ctx.res.path("report", "simulate_dir", args.simulate_dir).ok_or_else(|| {
        CliError::MissingArtifact("no simulation directory; pass --simulate-dir with the output of `mortsim simulate`".into())
    })?;
    let cohorts = ctx.res.list("report", "cohorts", args.cohorts, vec![])?;
    let table_years = ctx.res.list(
        "report",
        "table_years",
        args.table_years,
        DEFAULT_TABLE_YEARS.to_vec(),
    )?;

    let forecast_path = artifact(&forecast_dir, FORECAST_NAME, "mortsim forecast")?;
    let summary_path = artifact(&simulate_dir, SUMMARY_NAME, "mortsim simulate")?;
    let sensitivity = sensitivity_files(&forecast_dir)?;
    let bands = ctx.forecast_bands(&forecast_path)?;
    ctx.input("simulation_summary", &summary_path)?;
    for (_, _, p) in &sensitivity {
        ctx.input("sensitivity", p)?;
    }
    let history = ctx.mortality(&args.data, &Sex::BOTH)?;
    let surfaces = splice(&history, Some(&bands))?;

    // Figure 1: observed rates followed by the forecast median and band.
    let mut rows = Vec::new();
    for (sex, h) in &history {
        for y in h.grid().years() {
            for a in 0..=h.max_age() {
                let q = num(h.q(y, a));
                rows.push([
                    sex.to_string(),
                    y.to_string(),
                    a.to_string(),
                    "observed".into(),
                    q,
                    String::new(),
                    String::new(),
                ]);
            }
        }
        let b = &bands[sex];
        for y in b.median.years() {
            for a in 0..=b.median.max_age() {
                rows.push([
                    sex.to_string(),
                    y.to_string(),
                    a.to_string(),
                    "forecast".into(),
                    num(b.median.get(y, a)),
                    num(b.lower.get(y, a)),
                    num(b.upper.get(y, a)),
                ]);
            }
        }
    }
    write_csv(
        &ctx.out.file(BUNDLE[0]),
        &["sex", "year", "age", "kind", "median", "p2_5", "p97_5"],
        rows,
    )?;

    let mut rows = Vec::new();
    for (sex, s) in &surfaces {
        let curves = survival_curves(s, &cohorts)?;
        rows.extend(survival_rows(&curves).map(|[c, a, l]| [sex.to_string(), c, a, l]));
    }
    write_csv(
        &ctx.out.file(BUNDLE[1]),
        &["sex", "cohort", "age", "l"],
        rows,
    )?;

    write_csv(
        &ctx.out.file(BUNDLE[2]),
        &["year", "age", "log_ratio"],
        sex_ratio_rows(&surfaces[&Sex::Male], &surfaces[&Sex::Female])?,
    )?;

    let mut rows = Vec::new();
    for (sex, age, path) in &sensitivity {
        for rec in read_rows(path, &["t", "t_prime", "value"])? {
            rows.push([
                sex.to_string(),
                age.to_string(),
                rec[0].clone(),
                rec[1].clone(),
                rec[2].clone(),
            ]);
        }
    }
    write_csv(
        &ctx.out.file(BUNDLE[3]),
        &["sex", "age", "t", "t_prime", "value"],
        rows,
    )?;

    write_csv(
        &ctx.out.file(BUNDLE[4]),
        &SUMMARY_HEADER,
        read_rows(&summary_path, &SUMMARY_HEADER)?,
    )?;

    let table = expectancy_table(&surfaces, &table_years)?;
    let mut rows = Vec::new();
    for (y, row) in table_years.iter().zip(&table) {
        for ((label, _, _), cell) in TABLE_COLUMNS.iter().zip(row) {
            for (sex, e) in [(Sex::Female, &cell.0), (Sex::Male, &cell.1)] {
                rows.push([
                    y.to_string(),
                    label.to_string(),
                    sex.to_string(),
                    e.spa.whole_years().to_string(),
                    e.birth_year.to_string(),
                    num(e.expectancy),
                    num(e.adult_share),
                    num(e.life_share),
                ]);
            }
        }
    }
    write_csv(
        &ctx.out.file(BUNDLE[5]),
        &[
            "retirement_year",
            "column",
            "sex",
            "retirement_age",
            "birth_year",
            "expectancy",
            "adult_share",
            "life_share",
        ],
        rows,
    )?;
    ctx.out
        .write_text(BUNDLE[6], &render_table(&table_years, &table))?;
    Ok(())
}

fn artifact(dir: &Path, name: &str, producer: &str) -> CliResult<PathBuf> {
    let p = dir.join(name);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::MissingArtifact(format!(
            "{} not found; produce it with `{producer} --out {}`",
            p.display(),
            dir.display()
        )))
    }
}

/// `sensitivity_<sex>_<age>.csv` files in a forecast directory, sorted.
fn sensitivity_files(dir: &Path) -> CliResult<Vec<(Sex, u32, PathBuf)>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::MissingArtifact(format!("{}: {e}", dir.display())))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(stem) = name
            .strip_prefix("sensitivity_")
            .and_then(|s| s.strip_suffix(".csv"))
        else {
            continue;
        };
        let Some((sex, age)) = stem.split_once('_') else {
            continue;
        };
        if let (Ok(sex), Ok(age)) = (sex.parse::<Sex>(), age.parse::<u32>()) {
            found.push((sex, age, entry.path()));
        }
    }
    if found.is_empty() {
        return Err(CliError::MissingArtifact(format!(
            "no sensitivity matrices in {}; rerun `mortsim forecast --sensitivity AGE`",
            dir.display()
        )));
    }
    found.sort();
    Ok(found)
}

fn read_rows(path: &Path, header: &[&str]) -> CliResult<Vec<Vec<String>>> {
    let err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(err)?;
    let found: Vec<String> = rdr
        .headers()
        .map_err(err)?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(CliError::Input(format!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    rdr.records()
        .map(|r| {
            r.map(|r| r.iter().map(str::to_string).collect())
                .map_err(err)
        })
        .collect()
}

type Cell = (RetirementExpectancy, RetirementExpectancy);

/// Women and men expectancy for each table year and column.
pub fn expectancy_table(
    surfaces: &BTreeMap<Sex, CombinedSurface>,
    years: &[i32],
) -> CliResult<Vec<Vec<Cell>>> {
    let one = |sex: Sex, year: i32, age: u32| {
        let s = &surfaces[&sex];
        retirement_expectancy_at_age(s, year, PensionAge::years(age)).map_err(|e| match e {
            mortsim_core::Error::InsufficientHorizon { needed, .. } if needed > s.last_year() => {
                CliError::MissingArtifact(format!(
                    "retiring at {age} in {year} needs mortality through {needed}; rerun `mortsim forecast --horizon {needed}`"
                ))
            }
            other => other.into(),
        })
    };
    years
        .iter()
        .map(|&y| {
            TABLE_COLUMNS
                .iter()
                .map(|&(_, women, men)| Ok((one(Sex::Female, y, women)?, one(Sex::Male, y, men)?)))
                .collect()
        })
        .collect()
}

pub fn render_table(years: &[i32], table: &[Vec<Cell>]) -> String {
    let mut header = vec!["retiring in".to_string()];
    header.extend(TABLE_COLUMNS.iter().map(|c| c.0.to_string()));
    let mut lines = vec![header];
    for (y, row) in years.iter().zip(table) {
        let mut line = vec![y.to_string()];
        line.extend(
            row.iter()
                .map(|(w, m)| format!("{:.1} / {:.1}", w.expectancy, m.expectancy)),
        );
        lines.push(line);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::from("Life expectancy in retirement, women / men (years)\n\n");
    for (i, line) in lines.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        writeln!(out, "{}", cells.join(" | ").trim_end()).unwrap();
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            writeln!(out, "{}", rule.join("-+-")).unwrap();
        }
    }
    out
}
