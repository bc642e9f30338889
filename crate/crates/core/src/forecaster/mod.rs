//! Training protocol, tuning, extrapolation, ensembles and sensitivities for
//! the mortality extrapolation cell.

mod config;
mod ensemble;
mod sensitivity;
mod sequences;
mod train;
mod tune;

pub use config::{AgeSplit, TrainConfig};
pub use ensemble::{ensemble_forecast, extrapolate, EnsembleOutcome, ForecastEnsemble};
pub use sensitivity::{
    mean_reversion_summary, sensitivity_matrix, LagStat, ReversionSummary, ReversionWindows,
    SensitivityMatrix,
};
pub use sequences::{make_training_sequences, sequence_count, Dataset};
pub use train::{
    adjust_learning_rate, evaluate, final_protocol, mean_bias, train, train_monitored, FinalReport,
    TrainedModel,
};
pub use tune::{select_best, tune, TuneEntry, TuneGrid, TuneReport};
