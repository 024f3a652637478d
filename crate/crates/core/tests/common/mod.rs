#![allow(dead_code)]

pub mod oracle;

use std::sync::OnceLock;

use neuromimic::harness::{run_experiment, ExperimentConfig, ExperimentReport, Profile};
use neuromimic::telemetry::DatasetSample;

/// Desk network with a handful of scenarios and a short dataset.
pub fn tiny() -> ExperimentConfig {
    let mut c = ExperimentConfig::profile(Profile::Desk);
    c.root_seed = 3;
    c.task.test_per_class = 10;
    c.attacks.tamper_scenarios = 6;
    c.attacks.poison_scenarios = 6;
    c.dataset.n_samples = 160;
    c.dataset.windows_per_scenario = 4;
    c.detectors.ids_prestudy_windows = 30;
    c
}

/// One shared tiny experiment per test binary.
pub fn tiny_run() -> &'static (ExperimentReport, Vec<DatasetSample>) {
    static RUN: OnceLock<(ExperimentReport, Vec<DatasetSample>)> = OnceLock::new();
    RUN.get_or_init(|| run_experiment(&tiny(), Some(2)).expect("tiny experiment"))
}
