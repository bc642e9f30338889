use std::collections::BTreeMap;

use log::info;
use mortsim_core::data_io::{load_fertility_csv, load_flow_csv, load_population_csv, Sex};
use mortsim_core::microsim::{
    run_matrix, write_ratio_csv, write_summary_csv, write_tally_csv, Demography, LevelRule,
    MigrationScenario, ScenarioKind, SimConfig, SpaScheme, StepOptions, YearMonth,
};

use super::Ctx;
use crate::error::{CliError, CliResult, ResultExt};
use crate::SimulateArgs;

pub const DEFAULT_BASE_YEAR: i32 = 1991;
pub const DEFAULT_END_YEAR: i32 = 2061;
pub const DEFAULT_REPLICATES: usize = 100;
pub const DEFAULT_SCALE: f64 = 1000.0;
pub const SUMMARY_NAME: &str = "summary.csv";

pub fn pair_summary_name(scheme: SpaScheme, scenario: ScenarioKind) -> String {
    format!("summary_{}_{}.csv", scheme.name(), scenario.name())
}

pub fn run(ctx: &mut Ctx, args: SimulateArgs) -> CliResult<()> {
    let d = StepOptions::default();
    let base_year = ctx
        .res
        .value("simulate", "base_year", args.base_year, DEFAULT_BASE_YEAR)?;
    let step = StepOptions {
        scale: ctx
            .res
            .value("simulate", "scale", args.scale, DEFAULT_SCALE)?,
        male_birth_share: ctx.res.value(
            "simulate",
            "male_birth_share",
            args.male_birth_share,
            d.male_birth_share,
        )?,
        eval_month: ctx
            .res
            .value("simulate", "eval_month", args.eval_month, d.eval_month)?,
    };
    let mut schemes = ctx
        .res
        .list("simulate", "schemes", args.schemes, SpaScheme::ALL.to_vec())?;
    dedup_keep_order(&mut schemes);
    let mut kinds = ctx.res.list(
        "simulate",
        "scenarios",
        args.scenarios,
        ScenarioKind::ALL.to_vec(),
    )?;
    dedup_keep_order(&mut kinds);
    let scenarios = kinds
        .iter()
        .map(|&k| scenario_with_overrides(ctx, k))
        .collect::<CliResult<Vec<_>>>()?;
    let cfg = SimConfig {
        seed: ctx.seed,
        start_year: ctx
            .res
            .value("simulate", "start_year", args.start_year, base_year)?,
        end_year: ctx
            .res
            .value("simulate", "end_year", args.end_year, DEFAULT_END_YEAR)?,
        replicates: ctx.res.value(
            "simulate",
            "replicates",
            args.replicates,
            DEFAULT_REPLICATES,
        )?,
        scheme: schemes[0],
        scenario: scenarios[0].clone(),
        step,
    };

    let forecast = ctx.res.path("data", "forecast", args.forecast.clone());
    let history = ctx.mortality(&args.data, &Sex::BOTH)?;
    let surfaces = ctx.combined(&history, forecast.as_deref())?;
    let max_age = surfaces[&Sex::Male].max_age();
    let pop_path = ctx
        .res
        .require_path("data", "population", args.population)?;
    let flow_path = ctx.res.require_path("data", "flows", args.flows)?;
    let fert_path = ctx.res.require_path("data", "fertility", args.fertility)?;
    ctx.input("population", &pop_path)?;
    ctx.input("flows", &flow_path)?;
    ctx.input("fertility", &fert_path)?;
    let population = load_population_csv(&pop_path, base_year)?;
    let flows = load_flow_csv(&flow_path, max_age)?;
    let fertility = load_fertility_csv(&fert_path)?;
    let last_needed = cfg.end_year - 1;
    if surfaces.values().any(|s| s.last_year() < last_needed) {
        return Err(CliError::MissingArtifact(format!(
            "simulating to {} needs mortality through {last_needed}, but it ends in {}; pass a forecast with --forecast (horizon >= {last_needed})",
            cfg.end_year,
            surfaces[&Sex::Male].last_year()
        )));
    }
    let demo = Demography {
        male: &surfaces[&Sex::Male],
        female: &surfaces[&Sex::Female],
        flows: &flows,
        fertility: &fertility,
    };

    // One scenario at a time so failures carry the scenario name; replicate
    // streams do not depend on the grouping.
    let mut series = Vec::new();
    let mut runs = Vec::new();
    for scenario in &scenarios {
        let m = run_matrix(
            &cfg,
            &schemes,
            std::slice::from_ref(scenario),
            &population,
            &demo,
        )
        .context(|| format!("scenario {}", scenario.kind))?;
        info!("{}: {} replicates done", scenario.kind, cfg.replicates);
        series.extend(m.series);
        runs.extend(m.runs);
    }

    write_ratio_csv(&ctx.out.file("ratios.csv"), &series)?;
    write_summary_csv(&ctx.out.file(SUMMARY_NAME), &series)?;
    for s in &series {
        write_summary_csv(
            &ctx.out.file(&pair_summary_name(s.scheme, s.scenario)),
            std::slice::from_ref(s),
        )?;
    }
    write_tally_csv(&ctx.out.file("tallies.csv"), &runs)?;
    ctx.manifest
        .seeds
        .insert("replicate_streams".into(), cfg.replicates as u64);
    ctx.manifest
        .seeds
        .insert("initial_roster_stream".into(), u64::MAX);
    Ok(())
}

fn dedup_keep_order<T: PartialEq + Copy>(v: &mut Vec<T>) {
    let mut seen = Vec::with_capacity(v.len());
    v.retain(|x| {
        if seen.contains(x) {
            false
        } else {
            seen.push(*x);
            true
        }
    });
}

/// Level rules are written `trend` or `mean 2000 2011`.
pub fn parse_level_rule(raw: &str) -> Result<LevelRule, String> {
    let mut parts = raw.split_whitespace();
    match parts.next() {
        Some("trend") if parts.next().is_none() => Ok(LevelRule::Trend),
        Some("mean") => {
            let years = parts
                .map(|p| p.parse::<i32>().map_err(|e| format!("{p:?}: {e}")))
                .collect::<Result<Vec<_>, _>>()?;
            if years.is_empty() {
                return Err("`mean` needs at least one year".into());
            }
            Ok(LevelRule::MeanOfYears(years))
        }
        _ => Err(format!("expected `trend` or `mean YEAR...`, found {raw:?}")),
    }
}

fn show_level_rule(r: &LevelRule) -> String {
    match r {
        LevelRule::Trend => "trend".into(),
        LevelRule::MeanOfYears(ys) => {
            let ys: Vec<String> = ys.iter().map(i32::to_string).collect();
            format!("mean {}", ys.join(" "))
        }
    }
}

/// Built-in scenario parameters, overridden from `[scenario.<name>]`.
fn scenario_with_overrides(ctx: &mut Ctx, kind: ScenarioKind) -> CliResult<MigrationScenario> {
    let mut s = MigrationScenario::for_kind(kind);
    let section = format!("scenario.{}", kind.name());
    let r = &mut ctx.res;
    s.brexit = r.value::<YearMonth>(&section, "brexit", None, s.brexit)?;
    s.exodus_fraction = r.value(&section, "exodus_fraction", None, s.exodus_fraction)?;
    s.exodus_duration_years = r.value(
        &section,
        "exodus_duration_years",
        None,
        s.exodus_duration_years,
    )?;
    s.repatriation_fraction = r.value(
        &section,
        "repatriation_fraction",
        None,
        s.repatriation_fraction,
    )?;
    s.uk_outflow_reduction = r.value(
        &section,
        "uk_outflow_reduction",
        None,
        s.uk_outflow_reduction,
    )?;
    let mut rules = BTreeMap::new();
    for (key, current) in [("eu_inflow", &s.eu_inflow), ("eu_outflow", &s.eu_outflow)] {
        let raw = r.value::<String>(&section, key, None, show_level_rule(current))?;
        let rule = parse_level_rule(&raw)
            .map_err(|e| CliError::Input(format!("config {section}.{key}: {e}")))?;
        rules.insert(key, rule);
    }
    s.eu_inflow = rules.remove("eu_inflow").expect("set above");
    s.eu_outflow = rules.remove("eu_outflow").expect("set above");
    s.validate()
        .context(|| format!("scenario {}", kind.name()))?;
    Ok(s)
}
