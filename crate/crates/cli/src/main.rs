//! `mortsim` command-line front end.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;
use mortsim_core::data_io::Sex;
use mortsim_core::microsim::{ScenarioKind, SpaScheme};

use crate::config::{ConfigFile, Resolver};
use crate::error::{CliError, CliResult, EXIT_INTERNAL};
use crate::manifest::{Manifest, OutDir};

pub const DEFAULT_SEED: u64 = 1;

/// Mortality forecasting and pension dependency-ratio microsimulation.
///
/// Settings come from flags first, then the `--config` file, then built-in
/// defaults. Every run writes `manifest.json` into `--out` recording the
/// resolved settings, input digests and seeds.
#[derive(Parser, Debug)]
#[command(name = "mortsim", version, propagate_version = true)]
struct Cli {
    /// Config file: `[section]` headers, `key = value` lines, `#` comments.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed for every random stream [default: 1, or `seed` in the config].
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory, created if missing. Nothing is written elsewhere.
    #[arg(long, global = true, value_name = "DIR", default_value = "mortsim-out")]
    out: PathBuf,
    /// Worker threads for training ensembles and replicates.
    /// Results do not depend on this value.
    #[arg(long, global = true, value_name = "N", env = "MORTSIM_THREADS")]
    threads: Option<usize>,
    /// Log progress (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model per sex on every age and save checkpoints.
    Train(TrainArgs),
    /// Grid search over input size, depth and width on held-out ages.
    Tune(TuneArgs),
    /// Train an ensemble, extrapolate to the horizon and write median and bands.
    Forecast(ForecastArgs),
    /// Cohort survival curves, life expectancies and the sex mortality ratio.
    LifeTable(LifeTableArgs),
    /// Run the dependency-ratio microsimulation over schemes and scenarios.
    Simulate(SimulateArgs),
    /// Assemble plot-ready CSVs and the retirement expectancy table.
    Report(ReportArgs),
}

/// Mortality input shared by every command that reads rates.
#[derive(Args, Debug, Default, Clone)]
pub struct MortalityInput {
    /// Mortality table `year,age,sex,qx` [config: data.mortality].
    #[arg(long, value_name = "PATH")]
    pub mortality: Option<PathBuf>,
    /// Raise rates below EPS to EPS before taking logs. Off by default, in
    /// which case a zero rate is an input error [config: data.floor].
    #[arg(long, value_name = "EPS")]
    pub floor: Option<f64>,
    /// Sexes to process [config: data.sexes; default M,F].
    #[arg(long, value_delimiter = ',', value_name = "M,F")]
    pub sexes: Vec<Sex>,
}

/// Model geometry and optimiser settings [config section: train].
#[derive(Args, Debug, Default, Clone)]
pub struct ModelArgs {
    /// Input window N: years fed to the cell [default 40].
    #[arg(long, value_name = "N")]
    pub input_size: Option<usize>,
    /// Number of layers K [default 6].
    #[arg(long, value_name = "K")]
    pub depth: Option<usize>,
    /// Hidden layer width H [default 64].
    #[arg(long, value_name = "H")]
    pub hidden_width: Option<usize>,
    /// Rollout length used in the loss [default 10].
    #[arg(long, value_name = "STEPS")]
    pub n_train: Option<usize>,
    /// Sequences per minibatch [default 16].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Steps per learning-rate review window [default 10000].
    #[arg(long, value_name = "STEPS")]
    pub window: Option<usize>,
    /// Total optimiser steps [default 270000].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Initial RMSProp learning rate [default 1e-4].
    #[arg(long, value_name = "RATE")]
    pub learning_rate: Option<f64>,
    /// Rate multiplier applied when a window's mean loss fails to drop [default 0.9].
    #[arg(long, value_name = "KAPPA")]
    pub rate_decay: Option<f64>,
    /// Initial bias of every unit [default 0.1].
    #[arg(long)]
    pub b_init: Option<f64>,
    /// Scale of the truncated-normal weight initialisation [default 0.1].
    #[arg(long)]
    pub sigma_init: Option<f64>,
    /// Cut gradients between recursive steps instead of full
    /// backpropagation through time.
    #[arg(long)]
    pub stop_gradient: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: MortalityInput,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Train on training plus validation ages and score the test ages,
    /// writing test loss and bias [config: train.final_protocol].
    #[arg(long)]
    pub final_protocol: bool,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: MortalityInput,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Candidate input sizes [config: tune.input_sizes; default 15,25,40].
    #[arg(long, value_delimiter = ',')]
    pub input_sizes: Vec<usize>,
    /// Candidate depths [config: tune.depths; default 3,4,5,6,7].
    #[arg(long, value_delimiter = ',')]
    pub depths: Vec<usize>,
    /// Candidate hidden widths [config: tune.hidden_widths; default 32,64,128,256,512].
    #[arg(long, value_delimiter = ',')]
    pub hidden_widths: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub data: MortalityInput,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Ensemble size; run r is seeded seed + r [config: forecast.runs; default 100].
    #[arg(long)]
    pub runs: Option<usize>,
    /// Last forecast year [config: forecast.horizon; default 2061].
    #[arg(long, value_name = "YEAR")]
    pub horizon: Option<i32>,
    /// Extrapolate saved checkpoints instead of training; each checkpoint
    /// must carry a `sex` entry [config: forecast.checkpoints].
    #[arg(long, value_delimiter = ',', value_name = "PATH")]
    pub checkpoints: Vec<PathBuf>,
    /// Write the input-sensitivity matrix for these ages, averaged over the
    /// ensemble [config: forecast.sensitivity].
    #[arg(long, value_delimiter = ',', value_name = "AGE")]
    pub sensitivity: Vec<u32>,
}

#[derive(Args, Debug)]
pub struct LifeTableArgs {
    #[command(flatten)]
    pub data: MortalityInput,
    /// Forecast CSV whose median extends the history [config: data.forecast].
    #[arg(long, value_name = "PATH")]
    pub forecast: Option<PathBuf>,
    /// Birth years for survival curves [config: life_table.cohorts;
    /// default every fifth complete cohort].
    #[arg(long, value_delimiter = ',', value_name = "YEAR")]
    pub cohorts: Vec<i32>,
    /// Birth years for remaining life expectancy [config:
    /// life_table.expectancy_cohorts; default every tenth covered cohort].
    #[arg(long, value_delimiter = ',', value_name = "YEAR")]
    pub expectancy_cohorts: Vec<i32>,
    /// Ages at which remaining life expectancy is reported
    /// [config: life_table.ages; default 0,60,65,68].
    #[arg(long, value_delimiter = ',', value_name = "AGE")]
    pub ages: Vec<u32>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: MortalityInput,
    /// Forecast CSV whose median extends the history [config: data.forecast].
    #[arg(long, value_name = "PATH")]
    pub forecast: Option<PathBuf>,
    /// Base-year population `age,sex,origin,arrival_year,count` [config: data.population].
    #[arg(long, value_name = "PATH")]
    pub population: Option<PathBuf>,
    /// Migration flows `year,corridor,sex,age_lo,age_hi,direction,count` [config: data.flows].
    #[arg(long, value_name = "PATH")]
    pub flows: Option<PathBuf>,
    /// Fertility `age,rate` [config: data.fertility].
    #[arg(long, value_name = "PATH")]
    pub fertility: Option<PathBuf>,
    /// Year of the population table [config: simulate.base_year; default 1991].
    #[arg(long, value_name = "YEAR")]
    pub base_year: Option<i32>,
    /// First reported year [config: simulate.start_year; default the base year].
    #[arg(long, value_name = "YEAR")]
    pub start_year: Option<i32>,
    /// Last reported year [config: simulate.end_year; default 2061].
    #[arg(long, value_name = "YEAR")]
    pub end_year: Option<i32>,
    /// Replicates per scenario [config: simulate.replicates; default 100].
    #[arg(long)]
    pub replicates: Option<usize>,
    /// People represented by one agent [config: simulate.scale; default 1000].
    #[arg(long)]
    pub scale: Option<f64>,
    /// Month at which the ratio is evaluated each year [config: simulate.eval_month; default 7].
    #[arg(long, value_name = "MONTH")]
    pub eval_month: Option<u32>,
    /// Share of births that are male [config: simulate.male_birth_share; default 105/205].
    #[arg(long)]
    pub male_birth_share: Option<f64>,
    /// Pension-age schemes [config: simulate.schemes; default all four].
    #[arg(long, value_delimiter = ',')]
    pub schemes: Vec<SpaScheme>,
    /// Migration scenarios [config: simulate.scenarios; default all three].
    /// Parameters are overridable per scenario in `[scenario.<name>]`.
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Vec<ScenarioKind>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub data: MortalityInput,
    /// Output directory of a previous `forecast` run [config: report.forecast_dir].
    #[arg(long, value_name = "DIR")]
    pub forecast_dir: Option<PathBuf>,
    /// Output directory of a previous `simulate` run [config: report.simulate_dir].
    #[arg(long, value_name = "DIR")]
    pub simulate_dir: Option<PathBuf>,
    /// Birth years for the survival curves [config: report.cohorts;
    /// default every fifth complete cohort].
    #[arg(long, value_delimiter = ',', value_name = "YEAR")]
    pub cohorts: Vec<i32>,
    /// Retirement years for the expectancy table [config: report.table_years;
    /// default 1991,2005,2018].
    #[arg(long, value_delimiter = ',', value_name = "YEAR")]
    pub table_years: Vec<i32>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli, argv: Vec<String>) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let mut res = Resolver::new(&cfg);
    let seed = res.value("", "seed", cli.seed, DEFAULT_SEED)?;
    let name = match &cli.command {
        Command::Train(_) => "train",
        Command::Tune(_) => "tune",
        Command::Forecast(_) => "forecast",
        Command::LifeTable(_) => "life-table",
        Command::Simulate(_) => "simulate",
        Command::Report(_) => "report",
    };
    let mut manifest = Manifest::begin(name, argv, cfg.path(), rayon::current_num_threads());
    manifest.seeds.insert("seed".into(), seed);
    let mut out = OutDir::create(&cli.out)?;
    let mut ctx = commands::Ctx {
        res,
        manifest,
        out: &mut out,
        seed,
    };
    match cli.command {
        Command::Train(a) => commands::train::run(&mut ctx, a)?,
        Command::Tune(a) => commands::tune::run(&mut ctx, a)?,
        Command::Forecast(a) => commands::forecast::run(&mut ctx, a)?,
        Command::LifeTable(a) => commands::life_table::run(&mut ctx, a)?,
        Command::Simulate(a) => commands::simulate::run(&mut ctx, a)?,
        Command::Report(a) => commands::report::run(&mut ctx, a)?,
    }
    for key in cfg.unused(&ctx.res) {
        warn!("config key {key} was not used by `{name}`");
    }
    let commands::Ctx {
        res, mut manifest, ..
    } = ctx;
    manifest.config = res.record;
    manifest.finish(&out)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let outcome = std::panic::catch_unwind(|| run(cli, argv));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                if !e.to_string().contains(&s.to_string()) {
                    eprintln!("  caused by: {s}");
                }
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
