//! Annual-step microsimulation of a national population under pension and
//! migration scenarios.

mod agent;
mod ratio;
mod run;
mod scenario;
mod spa;
mod step;

pub use agent::{init_population, Agent, Population, Status};
pub use ratio::{dependency_counts, dependency_ratio};
pub use run::{
    run_matrix, run_replicate, run_scenario, write_ratio_csv, write_summary_csv, write_tally_csv,
    MatrixRun, RatioSeries, ReplicateRun, SimConfig, MAX_END_YEAR,
};
pub use scenario::{
    apportion, schedule_by_year, Adjustment, BrexitAdjuster, LevelRule, MigrationScenario,
    ScenarioKind,
};
pub use spa::{pension_date, spa_at, PensionAge, SpaScheme, YearMonth};
pub use step::{step_year, Demography, StepOptions, YearTally};

#[cfg(test)]
mod tests;
