//! Experiment reports with a fixed JSON schema.

use serde::Serialize;
use std::collections::BTreeMap;

/// Everything an experiment run produces besides its data files. The JSON
/// layout is fixed: field order follows the struct, metrics are sorted by
/// name, and a report is byte-identical across runs of the same (config,
/// seed, version) once the wall-clock field is cleared.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub version: String,
    pub config: BTreeMap<String, serde_json::Value>,
    pub trials_requested: u64,
    pub trials_used: u64,
    /// Samples discarded because the raw formula was unsatisfiable.
    pub excluded_unsat: u64,
    /// Samples discarded because exact counting hit the node budget.
    pub excluded_budget: u64,
    pub metrics: BTreeMap<String, f64>,
    pub ks_distance: Option<f64>,
    pub ks_p_value: Option<f64>,
    pub flags: Vec<String>,
    pub runtime_seconds: f64,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: BTreeMap<String, serde_json::Value>) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            trials_requested: 0,
            trials_used: 0,
            excluded_unsat: 0,
            excluded_budget: 0,
            metrics: BTreeMap::new(),
            ks_distance: None,
            ks_p_value: None,
            flags: Vec::new(),
            runtime_seconds: 0.0,
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        debug_assert!(value.is_finite(), "metric {name} = {value}");
        self.metrics.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> f64 {
        self.metrics[name]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// Copy with the wall-clock field cleared; the reproducibility contract
    /// covers everything else.
    pub fn canonical(&self) -> Self {
        let mut r = self.clone();
        r.runtime_seconds = 0.0;
        r
    }

    pub fn canonical_json(&self) -> String {
        self.canonical().to_json()
    }
}
