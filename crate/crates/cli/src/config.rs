//! Run configuration: a JSON document plus dotted `key=value` overrides.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use piston_core::{
    AngleState, CompactSet, NPistonState, Profile, SlowMode, SlowState, SystemConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Study {
    #[serde(default = "default_phases")]
    pub n_phases: usize,
    pub epsilons: Vec<f64>,
    /// Defaults to the system's `delta`.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    /// Slow-time horizon; defaults to the system's `horizon_T`.
    #[serde(default)]
    pub horizon: Option<f64>,
}

fn default_phases() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Audit {
    /// Micro-time length of the audit run.
    pub duration: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NPistonRun {
    pub state: NPistonState,
    pub horizon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub system: SystemConfig,
    pub initial: SlowState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compact_set: Option<CompactSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<Study>,
    /// Fast phases for `simulate` and `audit`; sampled from the seed if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<AngleState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npiston: Option<NPistonRun>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<Audit>,
}

impl Document {
    pub fn profile(&self) -> Result<Profile> {
        Ok(Profile::from_name(&self.system.potential)?)
    }

    pub fn compact_set(&self) -> Result<CompactSet> {
        if let Some(set) = &self.compact_set {
            return Ok(set.clone());
        }
        Ok(match self.initial.mode {
            SlowMode::HardSpeeds => CompactSet::default_hard(),
            SlowMode::SoftEnergies => CompactSet::default_soft(self.profile()?.barrier()),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.initial.left.len() != self.system.n1 || self.initial.right.len() != self.system.n2 {
            bail!(piston_core::Error::Shape(
                "initial values do not match n1/n2".into()
            ));
        }
        if !self.system.is_hard() {
            self.system.validate_with(&self.compact_set()?)?;
        }
        if let Some(p) = &self.phase {
            if p.phi_left.len() != self.system.n1 || p.phi_right.len() != self.system.n2 {
                bail!(piston_core::Error::Shape(
                    "phase does not match n1/n2".into()
                ));
            }
        }
        self.profile()?;
        Ok(())
    }
}

/// Parse `text`, apply overrides, and deserialize. Returns the document and
/// the effective JSON it was built from.
pub fn load_str(text: &str, overrides: &[String]) -> Result<(Document, Value)> {
    let mut value: Value = serde_json::from_str(text).context("config is not valid JSON")?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let doc: Document =
        serde_json::from_value(value.clone()).context("config does not match the schema")?;
    Ok((doc, value))
}

pub fn load(path: &Path, overrides: &[String]) -> Result<(Document, Value)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    load_str(&text, overrides)
}

/// Apply `a.b.c=value`. The value is parsed as JSON, falling back to a
/// string. A path whose first key is not a top-level section is looked up
/// in `system`, so `epsilon=0.01` sets `system.epsilon`.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not key=value"))?;
    let mut keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override `{spec}` has an empty key");
    }
    let root = doc
        .as_object()
        .ok_or_else(|| anyhow!("config root must be an object"))?;
    if !root.contains_key(keys[0]) && root.get("system").and_then(|s| s.get(keys[0])).is_some() {
        keys.insert(0, "system");
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("override `{spec}`: `{key}` is not an object"))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| anyhow!("override `{spec}`: parent is not an object"))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "system": {"n1": 1, "n2": 1, "masses_left": [1.0], "masses_right": [1.0],
                   "epsilon": 0.1, "delta": 0.0, "horizon_T": 1.0},
        "initial": {"X": 0.5, "W": 0.0, "left": [2.0], "right": [1.5], "mode": "hard-speeds"}
    }"#;

    #[test]
    fn overrides_reach_system_fields() {
        let (doc, _) = load_str(BASE, &["epsilon=0.01".into(), "initial.X=0.4".into()]).unwrap();
        assert_eq!(doc.system.epsilon, 0.01);
        assert_eq!(doc.initial.x, 0.4);
    }

    #[test]
    fn overrides_create_sections() {
        let (doc, _) = load_str(BASE, &["study.epsilons=[0.1,0.05]".into()]).unwrap();
        assert_eq!(doc.study.unwrap().epsilons, vec![0.1, 0.05]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(load_str(BASE, &["system.bogus=1".into()]).is_err());
        assert!(load_str(BASE, &["noequals".into()]).is_err());
    }
}
