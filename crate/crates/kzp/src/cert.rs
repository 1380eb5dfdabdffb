//! Machine-readable outcomes of the verification checks.
//!
//! A certificate serializes to one JSON object with sorted keys, so a stream of
//! certificates (newline-delimited JSON) is byte-stable for a fixed configuration.

use serde_json::{json, Map, Value};

/// Outcome of a check.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Status {
    /// The identity or property held.
    Pass,
    /// A counterexample was found; see the witness.
    Fail,
    /// The hypotheses of the check do not hold for this configuration.
    NotApplicable,
    /// The check could not be carried out.
    Error,
}

impl Status {
    /// Wire name.
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable => "not-applicable",
            Status::Error => "error",
        }
    }
}

/// The result of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    /// Check name.
    pub check: String,
    /// Echo of the parameters the check ran with.
    pub params: Value,
    /// Outcome.
    pub status: Status,
    /// Counterexample data on failure, supporting data otherwise (or `null`).
    pub witness: Value,
    /// Seed used for random sampling, if any.
    pub seed: Option<u64>,
    /// Wall-clock duration in milliseconds; `None` keeps output deterministic.
    pub timing_ms: Option<u64>,
}

impl Certificate {
    /// A certificate with the given status and no witness.
    pub fn new(check: &str, params: Value, status: Status) -> Certificate {
        Certificate { check: check.to_string(), params, status, witness: Value::Null, seed: None, timing_ms: None }
    }

    /// Maps the outcome of a sampled check: no witness passes, a witness fails and
    /// an error becomes an error status. The seed is recorded in every case.
    pub fn from_outcome(check: &str, params: Value, seed: u64, outcome: crate::error::Result<Option<Value>>) -> Certificate {
        match outcome {
            Ok(None) => Self::pass(check, params),
            Ok(Some(w)) => Self::fail(check, params, w),
            Err(err) => Self::error(check, params, &err.to_string()),
        }
        .with_seed(seed)
    }

    /// A passing certificate.
    pub fn pass(check: &str, params: Value) -> Certificate {
        Self::new(check, params, Status::Pass)
    }

    /// A failing certificate with a witness.
    pub fn fail(check: &str, params: Value, witness: Value) -> Certificate {
        Self::new(check, params, Status::Fail).with_witness(witness)
    }

    /// A not-applicable certificate with the reason recorded in the witness.
    pub fn not_applicable(check: &str, params: Value, reason: &str) -> Certificate {
        Self::new(check, params, Status::NotApplicable).with_witness(json!({ "reason": reason }))
    }

    /// An error certificate with the message recorded in the witness.
    pub fn error(check: &str, params: Value, message: &str) -> Certificate {
        Self::new(check, params, Status::Error).with_witness(json!({ "error": message }))
    }

    /// Attaches a witness.
    pub fn with_witness(mut self, witness: Value) -> Certificate {
        self.witness = witness;
        self
    }

    /// Attaches a seed.
    pub fn with_seed(mut self, seed: u64) -> Certificate {
        self.seed = Some(seed);
        self
    }

    /// Returns `true` for [`Status::Pass`].
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// JSON object with sorted keys.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("check".into(), Value::String(self.check.clone()));
        m.insert("params".into(), self.params.clone());
        m.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
        m.insert("status".into(), Value::String(self.status.as_str().into()));
        m.insert("timing".into(), self.timing_ms.map_or(Value::Null, |t| json!({ "ms": t })));
        m.insert("witness".into(), self.witness.clone());
        Value::Object(m)
    }

    /// One NDJSON line (without the trailing newline).
    pub fn to_line(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("serializable certificate")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialization_has_sorted_keys() {
        let c = Certificate::fail("flatness", json!({"p": 5, "n": 2}), json!({"k": 1})).with_seed(3);
        assert_eq!(
            c.to_line(),
            r#"{"check":"flatness","params":{"n":2,"p":5},"seed":3,"status":"fail","timing":null,"witness":{"k":1}}"#
        );
    }
}
