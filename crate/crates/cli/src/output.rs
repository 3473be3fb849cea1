//! Float formatting shared by all commands.

use serde_json::Value;

/// Rounds to 12 significant digits so that JSON output is stable across
/// platforms whose last-bit rounding differs.
pub fn round12(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(round12(v)).map_or(Value::Null, Value::Number)
}

pub fn nums(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|v| num(*v)).collect())
}
