//! Reconstruction metrics, cross-validated hyperparameter selection and the
//! method-by-scenario comparison experiment.

mod experiment;
mod metrics;

pub use experiment::{
    cross_validate, learn_graph, run_experiment, scaled_distances, CellRecord, CvGrid, CvOutcome,
    DataSpec, DistanceScaling, ExperimentReport, ExperimentSpec, Hyper, ImputationEntries, Method,
    MethodSelection, MetricUnits, ResultsTable, Scenario, SolverSettings,
};
pub use metrics::{mae, mae_selected, rmse, rmse_selected};
