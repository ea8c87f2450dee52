//! Recorded output of one simulation run.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// A state value as it appears in a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Position([i64; 2]),
}

impl StateValue {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            StateValue::Bool(b) => Some(if b { 1.0 } else { 0.0 }),
            StateValue::Int(i) => Some(i as f64),
            StateValue::Real(r) => Some(r),
            StateValue::Position(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSnapshot {
    pub id: usize,
    pub states: IndexMap<String, StateValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationTrace {
    pub seed: u64,
    pub steps: u64,
    /// One value per step for every recorder; booleans are recorded as 0/1.
    pub series: BTreeMap<String, Vec<f64>>,
    /// Per-step emission counts for every event named in the program.
    pub events: BTreeMap<String, Vec<u64>>,
    /// Instance states after the last step, objects in declaration order.
    pub final_state: IndexMap<String, Vec<InstanceSnapshot>>,
    /// Total executions of each `object.activity` over the run.
    pub activations: BTreeMap<String, u64>,
}

impl SimulationTrace {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn activation_count(&self, object: &str, activity: &str) -> u64 {
        self.activations
            .get(&format!("{object}.{activity}"))
            .copied()
            .unwrap_or(0)
    }

    pub fn event_total(&self, event: &str) -> u64 {
        self.events.get(event).map(|v| v.iter().sum()).unwrap_or(0)
    }
}

/// The recorded series, keyed by metric name.
pub fn snapshot_metrics(trace: &SimulationTrace) -> &BTreeMap<String, Vec<f64>> {
    &trace.series
}
