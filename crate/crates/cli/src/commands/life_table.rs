use mortsim_core::data_io::Sex;
use mortsim_core::life_metrics::{
    life_expectancy_at, mortality_sex_ratio, rectangularisation_index, survival_curve,
    CohortSurvival, CombinedSurface,
};

use super::{cohort_beyond_horizon, complete_cohorts, num, write_csv, Ctx};
use crate::error::{CliError, CliResult};
use crate::LifeTableArgs;

pub const DEFAULT_AGES: [u32; 4] = [0, 60, 65, 68];

pub fn run(ctx: &mut Ctx, args: LifeTableArgs) -> CliResult<()> {
    let sexes = ctx.sexes(&args.data)?;
    let forecast = ctx.res.path("data", "forecast", args.forecast.clone());
    let history = ctx.mortality(&args.data, &sexes)?;
    let surfaces = ctx.combined(&history, forecast.as_deref())?;
    let cohorts = ctx
        .res
        .list("life_table", "cohorts", args.cohorts, vec![])?;
    let exp_cohorts = ctx.res.list(
        "life_table",
        "expectancy_cohorts",
        args.expectancy_cohorts,
        vec![],
    )?;
    let ages = ctx
        .res
        .list("life_table", "ages", args.ages, DEFAULT_AGES.to_vec())?;

    for (&sex, s) in &surfaces {
        let curves = survival_curves(s, &cohorts)?;
        write_csv(
            &ctx.out.file(&format!("survival_{sex}.csv")),
            &["cohort", "age", "l"],
            survival_rows(&curves),
        )?;
        write_csv(
            &ctx.out.file(&format!("rectangularisation_{sex}.csv")),
            &["cohort", "interquartile_range"],
            curves
                .iter()
                .map(|c| Ok([c.birth_year.to_string(), num(rectangularisation_index(c)?)]))
                .collect::<CliResult<Vec<_>>>()?,
        )?;
        write_csv(
            &ctx.out.file(&format!("expectancy_{sex}.csv")),
            &["cohort", "age_at", "expectancy"],
            expectancy_rows(s, &exp_cohorts, &ages)?,
        )?;
    }
    if let (Some(m), Some(f)) = (surfaces.get(&Sex::Male), surfaces.get(&Sex::Female)) {
        write_csv(
            &ctx.out.file("sex_ratio.csv"),
            &["year", "age", "log_ratio"],
            sex_ratio_rows(m, f)?,
        )?;
    }
    Ok(())
}

/// Curves for the requested cohorts, or every fifth complete cohort.
pub fn survival_curves(s: &CombinedSurface, cohorts: &[i32]) -> CliResult<Vec<CohortSurvival>> {
    let chosen = if cohorts.is_empty() {
        let c = complete_cohorts(s, 5);
        if c.is_empty() {
            return Err(cohort_beyond_horizon(s, s.first_year()));
        }
        c
    } else {
        cohorts.to_vec()
    };
    chosen
        .iter()
        .map(|&b| survival_curve(s, b).map_err(|_| cohort_beyond_horizon(s, b)))
        .collect()
}

/// `[cohort, age, l]` rows.
pub fn survival_rows(curves: &[CohortSurvival]) -> impl Iterator<Item = [String; 3]> + '_ {
    curves.iter().flat_map(|c| {
        c.l.iter()
            .enumerate()
            .map(move |(a, &l)| [c.birth_year.to_string(), a.to_string(), num(l)])
    })
}

fn expectancy_rows(
    s: &CombinedSurface,
    cohorts: &[i32],
    ages: &[u32],
) -> CliResult<Vec<[String; 3]>> {
    let m = s.max_age() as i32;
    let fits = |b: i32, a: u32| b + a as i32 >= s.first_year() && b + m - 1 <= s.last_year();
    let mut rows = Vec::new();
    if cohorts.is_empty() {
        // Every tenth cohort with at least one requested age inside the surface.
        let lo = (s.first_year() - m).div_euclid(10) * 10;
        for b in (lo..=s.last_year()).step_by(10) {
            for &a in ages {
                if a <= s.max_age() && fits(b, a) {
                    rows.push([
                        b.to_string(),
                        a.to_string(),
                        num(life_expectancy_at(s, b, a)?),
                    ]);
                }
            }
        }
        if rows.is_empty() {
            return Err(CliError::MissingArtifact(format!(
                "no cohort has its remaining life inside {}..={}; extend the forecast horizon",
                s.first_year(),
                s.last_year()
            )));
        }
    } else {
        for &b in cohorts {
            for &a in ages {
                let e = life_expectancy_at(s, b, a).map_err(|e| match e {
                    mortsim_core::Error::InsufficientHorizon { needed, .. } if needed > s.last_year() => {
                        CliError::MissingArtifact(format!(
                            "expectancy of cohort {b} at age {a} needs mortality through {}; rerun `mortsim forecast --horizon {}`",
                            b + m - 1,
                            b + m - 1
                        ))
                    }
                    other => other.into(),
                })?;
                rows.push([b.to_string(), a.to_string(), num(e)]);
            }
        }
    }
    Ok(rows)
}

pub fn sex_ratio_rows(
    male: &CombinedSurface,
    female: &CombinedSurface,
) -> CliResult<Vec<[String; 3]>> {
    let grid = mortality_sex_ratio(male, female)?;
    let mut rows = Vec::with_capacity(grid.values().len());
    for y in grid.years() {
        for a in 0..=grid.max_age() {
            rows.push([y.to_string(), a.to_string(), num(grid.get(y, a))]);
        }
    }
    Ok(rows)
}
