use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Record of the invocation that produced a file. Identical manifests
/// reproduce identical outputs, so no wall-clock data is included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, args: &impl Serialize, seed: u64) -> Self {
        let parameters = match serde_json::to_value(args).expect("plain data") {
            Value::Object(m) => m.into_iter().collect(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        let versions = BTreeMap::from([
            ("qcausal".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("format".to_string(), "1".to_string()),
        ]);
        Self {
            command: command.to_string(),
            parameters,
            seed,
            versions,
        }
    }
}
